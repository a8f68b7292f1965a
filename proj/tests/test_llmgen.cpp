#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lamarl/llm_client.hpp"
#include "lamarl/llmgen.hpp"

using namespace lamarl;

namespace {

std::string fixture(const std::string& name) {
  return std::string(LAMARL_FIXTURES_DIR) + "/stub/" + name;
}

StubLlmClient reference_stub() {
  return StubLlmClient::from_directory(std::string(LAMARL_FIXTURES_DIR) + "/stub");
}

// Reference analysis matching the stub fixtures.
ConstraintAnalysis reference_analysis(StubLlmClient& stub) {
  return run_constraint_analysis(stub, reference_bundle());
}

}  // namespace

TEST_CASE("assemble_prompt renders exactly the flagged sections") {
  PromptBundle bundle = reference_bundle();

  SUBCASE("both flags off leaves only the task") {
    bundle.include_cot = false;
    bundle.include_apis = false;
    const std::string p = assemble_prompt(bundle);
    CHECK(p.find("## Task") != std::string::npos);
    CHECK(p.find("## Guiding questions") == std::string::npos);
    CHECK(p.find("## Available APIs") == std::string::npos);
  }
  SUBCASE("full bundle renders all three sections in order") {
    const std::string p = assemble_prompt(bundle);
    const auto task = p.find("## Task");
    const auto cot = p.find("## Guiding questions");
    const auto apis = p.find("## Available APIs");
    REQUIRE(task != std::string::npos);
    REQUIRE(cot != std::string::npos);
    REQUIRE(apis != std::string::npos);
    CHECK(task < cot);
    CHECK(cot < apis);
    for (const std::string& q : bundle.cot_questions) {
      CHECK(p.find(q) != std::string::npos);
    }
  }
  SUBCASE("toggling one flag changes exactly one section") {
    const std::string full = assemble_prompt(bundle);
    bundle.include_apis = false;
    const std::string no_apis = assemble_prompt(bundle);
    CHECK(no_apis.find("## Guiding questions") != std::string::npos);
    CHECK(no_apis.find("## Available APIs") == std::string::npos);
    CHECK(full.rfind(no_apis, 0) == 0);  // the no-APIs prompt is a prefix
  }
  SUBCASE("empty task is rejected") {
    bundle.task_description.clear();
    CHECK_THROWS_AS(assemble_prompt(bundle), Error);
  }
}

TEST_CASE("constraint analysis parses the scripted answer") {
  StubLlmClient stub = reference_stub();
  const ConstraintAnalysis a = reference_analysis(stub);
  CHECK(a.constraints.size() == 4);
  REQUIRE(a.basic_skills.size() == 3);
  CHECK(a.basic_skills[0] == "Movement towards the target region");
  CHECK(a.basic_skills[1] == "Collision avoidance");
  CHECK(a.basic_skills[2] == "Synchronization with neighbors");
  CHECK(a.key_subgoals.size() == 3);  // constraints 1, 2 and 4
  CHECK(a.basic.size() == 3);
  CHECK(a.complex_.size() == 1);
}

TEST_CASE("empty or malformed analysis responses raise parse errors") {
  StubLlmClient stub;
  stub.add_response("constraint_analysis", "");
  CHECK_THROWS_AS(run_constraint_analysis(stub, reference_bundle()), LlmParseError);

  StubLlmClient stub2;
  stub2.add_response("constraint_analysis", "{\"constraints\": [1,2]}");
  CHECK_THROWS_AS(run_constraint_analysis(stub2, reference_bundle()), LlmParseError);
}

TEST_CASE("generation produces the reference specs from the fixtures") {
  StubLlmClient stub = reference_stub();
  const ConstraintAnalysis analysis = reference_analysis(stub);
  const GenerationResult result =
      generate_functions(stub, analysis, reference_bundle());

  REQUIRE(result.policy_spec.force_terms.size() == 3);
  CHECK(result.policy_spec.force_terms[0].primitive == ForcePrimitive::AttractTarget);
  CHECK(result.policy_spec.force_terms[1].primitive == ForcePrimitive::RepelNeighbors);
  CHECK(result.policy_spec.force_terms[2].primitive == ForcePrimitive::SyncVelocity);
  REQUIRE(result.reward_spec.condition_terms.size() == 3);
  CHECK(result.reward_spec.condition_terms[0].primitive ==
        ConditionPrimitive::InsideRegion);
  CHECK(result.reward_spec.condition_terms[1].primitive ==
        ConditionPrimitive::CollisionFree);
  CHECK(result.reward_spec.condition_terms[2].primitive ==
        ConditionPrimitive::ExplorationDone);
  CHECK(result.model_id == "stub");
}

TEST_CASE("generation with zero basic skills yields an empty valid policy") {
  StubLlmClient stub;
  stub.add_response("policy_function", R"({"kind":"policy","terms":[]})");
  stub.add_response("reward_function",
                    R"({"kind":"reward","terms":[{"primitive":"inside_region"}]})");
  ConstraintAnalysis analysis;
  analysis.constraints = {"Entering the target region"};
  analysis.basic = {};
  analysis.complex_ = {"Entering the target region"};
  analysis.basic_skills = {};
  analysis.key_subgoals = {"Entering the target region"};
  const GenerationResult result =
      generate_functions(stub, analysis, reference_bundle());
  CHECK(result.policy_spec.force_terms.empty());

  LocalView v;
  v.r_sense = 0.4;
  v.r_avoid = 0.1;
  const Vec2 a = eval_spec(result.policy_spec, v).action;
  CHECK(a.x == 0.0);
  CHECK(a.y == 0.0);
}

TEST_CASE("unknown primitives fail generation with the allowed list") {
  StubLlmClient stub = reference_stub();
  const ConstraintAnalysis analysis = reference_analysis(stub);
  StubLlmClient bad;
  bad.add_response("policy_function",
                   R"({"kind":"policy","terms":[{"primitive":"levitate"}]})");
  bad.add_response("reward_function", "{}");
  CHECK_THROWS_WITH_AS(generate_functions(bad, analysis, reference_bundle()),
                       doctest::Contains("attract_target"), LlmParseError);
}

TEST_CASE("review passes complete specs and names every omission") {
  StubLlmClient stub = reference_stub();
  const ConstraintAnalysis analysis = reference_analysis(stub);
  const GenerationResult complete =
      generate_functions(stub, analysis, reference_bundle());

  SUBCASE("complete specs pass") {
    const ReviewReport r = review_functions(complete, analysis);
    CHECK(r.policy_ok);
    CHECK(r.reward_ok);
    CHECK(r.passed());
  }
  SUBCASE("dropping sync_velocity is reported as the missing skill") {
    GenerationResult result = complete;
    result.policy_spec.force_terms.pop_back();
    const ReviewReport r = review_functions(result, analysis);
    CHECK_FALSE(r.policy_ok);
    REQUIRE(r.missing_skills.size() == 1);
    CHECK(r.missing_skills[0] == "Synchronization with neighbors");
  }
  SUBCASE("dropping exploration_done fails the reward") {
    GenerationResult result = complete;
    result.reward_spec.condition_terms.pop_back();
    const ReviewReport r = review_functions(result, analysis);
    CHECK_FALSE(r.reward_ok);
    REQUIRE(r.missing_subgoals.size() == 1);
    CHECK(r.missing_subgoals[0] == "Exploration of unoccupied cells");
  }
  SUBCASE("unmapped skill names fail conservatively") {
    ConstraintAnalysis odd = analysis;
    odd.basic_skills.push_back("Singing sea shanties");
    const ReviewReport r = review_functions(complete, odd);
    CHECK_FALSE(r.policy_ok);
    REQUIRE(r.missing_skills.size() == 1);
    CHECK(r.missing_skills[0] == "Singing sea shanties");
  }
}

TEST_CASE("review coverage is exactly set containment over 64 subsets") {
  StubLlmClient stub = reference_stub();
  const ConstraintAnalysis analysis = reference_analysis(stub);
  const GenerationResult complete =
      generate_functions(stub, analysis, reference_bundle());

  for (int mask = 0; mask < 64; ++mask) {
    GenerationResult result = complete;
    BehaviorSpec policy;
    policy.kind = SpecKind::Policy;
    for (int k = 0; k < 3; ++k) {
      if (mask & (1 << k)) policy.force_terms.push_back(complete.policy_spec.force_terms[k]);
    }
    BehaviorSpec reward;
    reward.kind = SpecKind::Reward;
    for (int k = 0; k < 3; ++k) {
      if (mask & (1 << (k + 3))) {
        reward.condition_terms.push_back(complete.reward_spec.condition_terms[k]);
      }
    }
    result.policy_spec = policy;
    result.reward_spec = reward;
    const ReviewReport r = review_functions(result, analysis);
    CHECK(r.policy_ok == ((mask & 0b000111) == 0b000111));
    CHECK(r.reward_ok == ((mask & 0b111000) == 0b111000));
    CHECK(r.missing_skills.size() ==
          static_cast<std::size_t>(3 - __builtin_popcount(mask & 0b111)));
  }
}

TEST_CASE("pipeline is reproducible with the deterministic stub") {
  const auto run = [] {
    StubLlmClient stub = reference_stub();
    const ConstraintAnalysis analysis =
        run_constraint_analysis(stub, reference_bundle());
    const GenerationResult result =
        generate_functions(stub, analysis, reference_bundle());
    return spec_to_json(result.policy_spec) + spec_to_json(result.reward_spec);
  };
  CHECK(run() == run());
}

TEST_CASE("harness arithmetic over scripted outcomes") {
  SUBCASE("always-succeeding stub gives 100%") {
    StubLlmClient stub = reference_stub();
    const auto outcomes =
        success_rate_harness(stub, reference_bundle(), {{"full", true, true}}, 5);
    REQUIRE(outcomes.size() == 1);
    CHECK(outcomes[0].successes == 5);
    CHECK(outcomes[0].fraction == 1.0);
  }
  SUBCASE("137 of 200 scripted successes give exactly 68.5%") {
    StubLlmClient stub;
    std::ifstream a(fixture("constraint_analysis.json"));
    std::ifstream p(fixture("policy_function.json"));
    std::ifstream r(fixture("reward_function.json"));
    const std::string analysis((std::istreambuf_iterator<char>(a)),
                               std::istreambuf_iterator<char>());
    const std::string policy((std::istreambuf_iterator<char>(p)),
                             std::istreambuf_iterator<char>());
    const std::string reward((std::istreambuf_iterator<char>(r)),
                             std::istreambuf_iterator<char>());
    for (int trial = 0; trial < 200; ++trial) {
      stub.add_response("constraint_analysis", analysis);
      // Trials 137.. emit an invalid policy so the run fails.
      stub.add_response("policy_function",
                        trial < 137 ? policy : "not json at all");
      stub.add_response("reward_function", reward);
    }
    const auto outcomes =
        success_rate_harness(stub, reference_bundle(), {{"full", true, true}}, 200);
    REQUIRE(outcomes.size() == 1);
    CHECK(outcomes[0].successes == 137);
    CHECK(outcomes[0].fraction == doctest::Approx(0.685));
    CHECK(outcomes[0].failure_reasons.size() == 63);
  }
  SUBCASE("four default variants are reported") {
    StubLlmClient stub = reference_stub();
    const auto outcomes = success_rate_harness(stub, reference_bundle(),
                                               default_harness_variants(), 2);
    REQUIRE(outcomes.size() == 4);
    CHECK(outcomes[0].variant == "full");
    CHECK(outcomes[3].variant == "neither");
  }
}

TEST_CASE("stub client errors on missing fixtures and missing credentials") {
  StubLlmClient stub;
  stub.add_response("constraint_analysis", "x");
  CompletionParams params;
  params.step_tag = "unknown_step";
  CHECK_THROWS_AS(stub.complete({}, params), LlmConfigError);

  // Credential validation happens before any network activity.
  unsetenv("LAMARL_LLM_URL");
  unsetenv("LAMARL_LLM_KEY");
  CHECK_THROWS_AS(HttpLlmClient::from_env("model"), LlmConfigError);
  setenv("LAMARL_LLM_URL", "http://localhost:9/v1/chat/completions", 1);
  CHECK_THROWS_AS(HttpLlmClient::from_env("model"), LlmConfigError);
  unsetenv("LAMARL_LLM_URL");
}

TEST_CASE("http client retries a 429 then succeeds, logging both attempts") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                CHECK(body.at("model") == "test-model");
                CHECK(body.at("messages").is_array());
                if (hits.fetch_add(1) == 0) {
                  res.status = 429;
                  res.set_content("slow down", "text/plain");
                  return;
                }
                nlohmann::json reply;
                reply["choices"] = {{{"message", {{"content", "hello"}}}}};
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  std::vector<std::string> log_lines;
  HttpLlmClient::Options opt;
  opt.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  opt.api_key = "k";
  opt.model = "test-model";
  opt.backoff_initial_s = 0.01;
  opt.log = [&](const std::string& line) { log_lines.push_back(line); };
  HttpLlmClient client(opt);

  CompletionParams params;
  params.step_tag = "constraint_analysis";
  const std::string out = client.complete({{"user", "hi"}}, params);
  CHECK(out == "hello");
  CHECK(hits.load() == 2);
  // One failure line, one retry line, one success line.
  REQUIRE(log_lines.size() >= 3);
  CHECK(log_lines[0].find("429") != std::string::npos);

  server.stop();
  server_thread.join();
}

TEST_CASE("http client surfaces auth failures and malformed replies distinctly") {
  httplib::Server server;
  server.Post("/auth", [](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
  });
  server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpLlmClient::Options opt;
  opt.api_key = "k";
  opt.backoff_initial_s = 0.01;
  opt.url = "http://127.0.0.1:" + std::to_string(port) + "/auth";
  CHECK_THROWS_AS(HttpLlmClient(opt).complete({}, {}), LlmAuthError);
  opt.url = "http://127.0.0.1:" + std::to_string(port) + "/garbage";
  CHECK_THROWS_AS(HttpLlmClient(opt).complete({}, {}), LlmMalformedReplyError);

  server.stop();
  server_thread.join();
}

TEST_CASE("transcripts are appended as one JSON line per call") {
  const std::string path = "/tmp/lamarl_test_transcript.jsonl";
  std::remove(path.c_str());
  TranscriptLog log(path);
  log.append("stub", "constraint_analysis", {{"user", "q"}}, "a");
  log.append("stub", "policy_function", {{"user", "q2"}}, "b");
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("time"));
    CHECK(j.at("model") == "stub");
    ++n;
  }
  CHECK(n == 2);
}
