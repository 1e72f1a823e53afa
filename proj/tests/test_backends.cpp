#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "cimr/cimr.hpp"

using namespace cimr;

namespace {

const std::vector<double> kTable{78.5, 88.0, 91.0, 91.5};

FusedFeatures no_features() { return {}; }

ScenarioView view_of(const Scenario& s) {
  return {s.kind, s.instruction, render(s.scene, 0), canonical_text(s.initial_context)};
}

// Feedback naming exactly the category the response's error surfaces as.
FeedbackSignal matching_feedback(const Scenario& s, const Response& r) {
  FeedbackSignal f;
  if (const auto c = live_error(s, r)) f.add(*c, {}, "test");
  return f;
}

BackendErrc backend_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const BackendError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no BackendError thrown";
  return BackendErrc::Unreachable;
}

}  // namespace

// --- calibration ----------------------------------------------------------------

TEST(Calibrate, ReferenceCurve) {
  const OracleConfig c = calibrate_oracle(kTable);
  // Closed form recomputed here: remaining failures after each round.
  EXPECT_NEAR(c.p_initial_error, 0.215, 1e-12);
  ASSERT_EQ(c.correction_rates.size(), 3u);
  EXPECT_NEAR(c.correction_rates[0], 9.5 / 21.5, 1e-12);
  EXPECT_NEAR(c.correction_rates[0], 0.4419, 1e-4);
  EXPECT_NEAR(c.correction_rates[1], 0.25, 1e-12);
  EXPECT_NEAR(c.correction_rates[2], 0.5 / 9.0, 1e-12);
  EXPECT_NEAR(c.correction_rates[2], 0.0556, 1e-4);
  EXPECT_EQ(c.correction_rate(5), 0.0);
  EXPECT_EQ(c.correction_rate(1), 0.0);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(expected_accuracy(c, k, 1.0) * 100.0, kTable[k - 1], 1e-9);
}

TEST(Calibrate, RejectsBadTargets) {
  auto code = [](std::vector<double> t) {
    try {
      calibrate_oracle(t);
    } catch (const DomainError& e) {
      return std::optional(e.code());
    }
    return std::optional<DomainErrc>();
  };
  EXPECT_EQ(code({50, 50, 60, 70}), DomainErrc::BadCalibration);
  EXPECT_EQ(code({80, 70, 90, 95}), DomainErrc::BadCalibration);
  EXPECT_EQ(code({0, 50, 60, 70}), DomainErrc::BadCalibration);
  EXPECT_EQ(code({50, 60, 70, 100}), DomainErrc::BadCalibration);
  EXPECT_EQ(code({}), DomainErrc::BadCalibration);
}

TEST(Calibrate, NearPerfectFirstPass) {
  const std::vector<double> t{99.999999, 99.9999995};
  EXPECT_NEAR(calibrate_oracle(t).p_initial_error, 0.0, 1e-6);
}

TEST(Calibrate, ContextFactorForStaticContextLevel) {
  const OracleConfig c = calibrate_oracle(kTable);
  const double kappa = solve_context_factor(c, 4, 84.7);
  EXPECT_NEAR(expected_accuracy(c, 4, kappa) * 100.0, 84.7, 1e-9);
  EXPECT_NEAR(kappa, 0.42, 0.01);
  EXPECT_EQ(solve_context_factor(c, 4, 50.0), 0.0);
  EXPECT_EQ(solve_context_factor(c, 4, 99.0), 1.0);
}

TEST(OracleConfig, ValidateRejectsOutOfRange) {
  OracleConfig c;
  c.p_initial_error = 1.5;
  EXPECT_THROW(validate(c), DomainError);
  c.p_initial_error = 0.1;
  c.correction_rates = {0.5, -0.1};
  EXPECT_THROW(ScriptedOracle(c, generate_scenario(1, GoalKind::count)), DomainError);
}

// --- scripted oracle: first pass --------------------------------------------------

TEST(ScriptedOracle, ZeroErrorAlwaysSucceeds) {
  OracleConfig c;
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Scenario s = generate_scenario(seed, static_cast<GoalKind>(seed % 3));
    ScriptedOracle oracle(c, s);
    const Response r = oracle.generate_initial(view_of(s), no_features(), rng);
    EXPECT_TRUE(execute_and_evaluate(s.goal, s.scene, r).success) << seed;
  }
}

TEST(ScriptedOracle, PlaceErrorIsOneRowAbove) {
  OracleConfig c;
  c.p_initial_error = 1.0;
  Rng rng(2);
  for (std::uint64_t seed = 1; seed < 50; ++seed) {
    const Scenario s = generate_scenario(seed, GoalKind::place);
    const auto& g = std::get<PlaceGoal>(s.goal);
    const GridPos ref = s.scene.find(g.reference_id)->pos;
    const Response r = ScriptedOracle(c, s).generate_initial(view_of(s), no_features(), rng);
    const auto& plan = std::get<ActionPlan>(r.answer);
    ASSERT_EQ(plan.moves.size(), 1u);
    EXPECT_EQ(plan.moves[0].object_id, g.subject_id);
    EXPECT_EQ(plan.moves[0].to, (GridPos{ref.row - 1, ref.col - 1}));
    EXPECT_FALSE(execute_and_evaluate(s.goal, s.scene, r).success);
  }
}

TEST(ScriptedOracle, IdentifyAndCountErrorTemplates) {
  OracleConfig c;
  c.p_initial_error = 1.0;
  Rng rng(3);
  for (std::uint64_t seed = 1; seed < 100; ++seed) {
    const Scenario id = generate_scenario(seed, GoalKind::identify_all);
    const Response ri = ScriptedOracle(c, id).generate_initial(view_of(id), no_features(), rng);
    EXPECT_EQ(live_error(id, ri), FeedbackCategory::CONSTRAINT_VIOLATION) << seed;

    const Scenario ct = generate_scenario(seed, GoalKind::count);
    const Response rc = ScriptedOracle(c, ct).generate_initial(view_of(ct), no_features(), rng);
    const auto& f = std::get<CountGoal>(ct.goal).filter;
    int front = 0;
    for (const auto& o : ct.scene.objects) front += o.depth == Depth::front && f.matches(o.attributes());
    EXPECT_EQ(std::get<CountValue>(rc.answer).value, front);
    EXPECT_EQ(live_error(ct, rc), FeedbackCategory::COUNT_MISMATCH);
  }
}

TEST(ScriptedOracle, InitialSuccessRateMatchesCalibration) {
  const OracleConfig c = calibrate_oracle(kTable);
  Rng rng(2026);
  const int n = 10000;
  int ok = 0;
  for (int i = 0; i < n; ++i) {
    const Scenario s = generate_scenario(static_cast<std::uint64_t>(i), static_cast<GoalKind>(i % 3));
    const Response r = ScriptedOracle(c, s).generate_initial(view_of(s), no_features(), rng);
    ok += execute_and_evaluate(s.goal, s.scene, r).success;
  }
  EXPECT_NEAR(100.0 * ok / n, 78.5, 1.0);
}

TEST(ScriptedOracle, CumulativeCurveMatchesCalibration) {
  // Every refinement sees feedback naming the live error.
  const OracleConfig c = calibrate_oracle(kTable);
  Rng rng(77);
  const int n = 10000;
  std::array<int, 4> ok{};
  for (int i = 0; i < n; ++i) {
    const Scenario s = generate_scenario(static_cast<std::uint64_t>(i) + 50000, static_cast<GoalKind>(i % 3));
    ScriptedOracle oracle(c, s);
    Response r = oracle.generate_initial(view_of(s), no_features(), rng);
    for (int round = 1; round <= 4; ++round) {
      if (round > 1) r = oracle.refine_response(view_of(s), r, matching_feedback(s, r), {}, round, rng);
      ok[static_cast<std::size_t>(round - 1)] += execute_and_evaluate(s.goal, s.scene, r).success;
    }
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(100.0 * ok[static_cast<std::size_t>(k)] / n, kTable[static_cast<std::size_t>(k)], 1.0) << k;
}

// --- scripted oracle: refinement ---------------------------------------------------

TEST(ScriptedOracle, EmptyFeedbackReturnsPrev) {
  OracleConfig c = calibrate_oracle(kTable);
  c.p_initial_error = 1.0;
  c.correction_rates = {1.0, 1.0, 1.0};
  Rng rng(4);
  const Scenario s = generate_scenario(4, GoalKind::place);
  ScriptedOracle oracle(c, s);
  const Response r = oracle.generate_initial(view_of(s), no_features(), rng);
  EXPECT_EQ(oracle.refine_response(view_of(s), r, FeedbackSignal{}, {}, 2, rng), r);
  EXPECT_EQ(oracle.refine_response(view_of(s), r, FeedbackSignal{}, {}, 2, rng), r);
}

TEST(ScriptedOracle, CorrectionNeedsMatchingCategory) {
  OracleConfig c;
  c.p_initial_error = 1.0;
  c.correction_rates = {1.0, 1.0, 1.0};
  Rng rng(5);
  for (auto kind : {GoalKind::place, GoalKind::identify_all, GoalKind::count}) {
    const Scenario s = generate_scenario(11, kind);
    ScriptedOracle oracle(c, s);
    const Response r = oracle.generate_initial(view_of(s), no_features(), rng);
    const auto live = live_error(s, r);
    ASSERT_TRUE(live.has_value());

    FeedbackSignal wrong;
    for (int k = 0; k < 5; ++k) {
      const auto cat = static_cast<FeedbackCategory>(k);
      if (cat != *live) wrong.add(cat, {}, "other");
    }
    EXPECT_EQ(oracle.refine_response(view_of(s), r, wrong, {}, 2, rng), r);

    const Response fixed = oracle.refine_response(view_of(s), r, matching_feedback(s, r), {}, 2, rng);
    EXPECT_TRUE(execute_and_evaluate(s.goal, s.scene, fixed).success);
  }
}

TEST(ScriptedOracle, ZeroContextFactorNeverCorrects) {
  OracleConfig c = calibrate_oracle(kTable);
  c.context_factor = 0.0;
  Rng rng(6);
  int initial = 0, final_ok = 0;
  for (int i = 0; i < 2000; ++i) {
    const Scenario s = generate_scenario(static_cast<std::uint64_t>(i), static_cast<GoalKind>(i % 3));
    ScriptedOracle oracle(c, s);
    Response r = oracle.generate_initial(view_of(s), no_features(), rng);
    initial += execute_and_evaluate(s.goal, s.scene, r).success;
    for (int round = 2; round <= 4; ++round)
      r = oracle.refine_response(view_of(s), r, matching_feedback(s, r), {}, round, rng);
    final_ok += execute_and_evaluate(s.goal, s.scene, r).success;
  }
  EXPECT_EQ(initial, final_ok);
}

TEST(ScriptedOracle, DeterministicGivenRng) {
  const OracleConfig c = calibrate_oracle(kTable);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s = generate_scenario(seed, GoalKind::identify_all);
    Rng a(seed), b(seed);
    EXPECT_EQ(ScriptedOracle(c, s).generate_initial(view_of(s), no_features(), a),
              ScriptedOracle(c, s).generate_initial(view_of(s), no_features(), b));
  }
}

// --- remote backend -------------------------------------------------------------

namespace {

class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/respond", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(RemoteBackend, RoundTripsRequestAndReply) {
  std::mutex mu;
  std::vector<json> seen;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      seen.push_back(json::parse(req.body));
    }
    res.set_content(R"({"response": {"kind": "count", "value": 3}, "rationale": "three"})",
                    "application/json");
  });
  const Scenario s = generate_scenario(2, GoalKind::count);
  RemoteBackend backend(server.url(), 5.0);
  Rng rng(1);
  const Response first = backend.generate_initial(view_of(s), no_features(), rng);
  EXPECT_EQ(first.answer, (Response{CountValue{3}, ""}.answer));
  EXPECT_EQ(first.rationale, "three");

  FeedbackSignal fb;
  fb.add(FeedbackCategory::COUNT_MISMATCH, {}, "observed 4");
  backend.refine_response(view_of(s), first, fb, {}, 2, rng);

  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].at("instruction"), s.instruction);
  EXPECT_TRUE(seen[0].at("feedback").is_null());
  EXPECT_EQ(seen[0].at("round"), 1);
  EXPECT_EQ(seen[0].at("context"), canonical_text(s.initial_context));
  const json& obs = seen[0].at("observation");
  ASSERT_EQ(obs.size(), 8u);
  ASSERT_EQ(obs[0].size(), 8u);
  ASSERT_EQ(obs[0][0].size(), 2u);
  EXPECT_EQ(obs[0][0][0].size(), 11u);
  EXPECT_EQ(seen[1].at("round"), 2);
  EXPECT_EQ(seen[1].at("feedback")[0].at("category"), "COUNT_MISMATCH");
  EXPECT_EQ(seen[1].at("feedback")[0].at("detail"), "observed 4");
}

TEST(RemoteBackend, PlanAndIdReplies) {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto instruction = json::parse(req.body).at("instruction").get<std::string>();
    if (instruction.rfind("place", 0) == 0) {
      res.set_content(R"({"response": {"kind": "plan", "value": [{"object_id": 0, "to": [2, 3]}]}})",
                      "application/json");
    } else {
      res.set_content(R"({"response": {"kind": "ids", "value": [4, 1]}, "rationale": ""})",
                      "application/json");
    }
  });
  Rng rng(1);
  RemoteBackend backend(server.url());
  const Scenario place = generate_scenario(1, GoalKind::place);
  const Response rp = backend.generate_initial(view_of(place), no_features(), rng);
  EXPECT_EQ(std::get<ActionPlan>(rp.answer).moves, (std::vector<MoveAction>{{0, {2, 3}}}));
  const Scenario ident = generate_scenario(1, GoalKind::identify_all);
  const Response ri = backend.generate_initial(view_of(ident), no_features(), rng);
  EXPECT_EQ(std::get<IdSet>(ri.answer).ids, (std::set<int>{1, 4}));
}

TEST(RemoteBackend, UnreachableEndpoint) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }  // closed again: nothing listens there now
  RemoteBackend backend("http://127.0.0.1:" + std::to_string(port), 2.0);
  const Scenario s = generate_scenario(3, GoalKind::count);
  Rng rng(1);
  EXPECT_EQ(backend_code([&] { backend.generate_initial(view_of(s), no_features(), rng); }),
            BackendErrc::Unreachable);
}

TEST(RemoteBackend, TimeoutIsUnreachable) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content(R"({"response": {"kind": "count", "value": 1}})", "application/json");
  });
  RemoteBackend backend(server.url(), 0.2);
  const Scenario s = generate_scenario(3, GoalKind::count);
  Rng rng(1);
  EXPECT_EQ(backend_code([&] { backend.generate_initial(view_of(s), no_features(), rng); }),
            BackendErrc::Unreachable);
}

TEST(RemoteBackend, BadReplies) {
  const std::vector<std::pair<int, std::string>> replies{
      {200, "not json"},
      {200, R"({"rationale": "missing response"})"},
      {200, R"({"response": {"kind": "ids", "value": [1]}})"},  // wrong kind for a Count task
      {200, R"({"response": {"kind": "count", "value": "three"}})"},
      {500, R"({"response": {"kind": "count", "value": 1}})"},
  };
  std::atomic<std::size_t> next{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    const auto& [status, body] = replies[next++];
    res.status = status;
    res.set_content(body, "application/json");
  });
  RemoteBackend backend(server.url(), 5.0);
  const Scenario s = generate_scenario(3, GoalKind::count);
  Rng rng(1);
  for (std::size_t i = 0; i < replies.size(); ++i) {
    EXPECT_EQ(backend_code([&] { backend.generate_initial(view_of(s), no_features(), rng); }),
              BackendErrc::BadReply)
        << i;
  }
}

TEST(RemoteBackend, UrlResolution) {
  ::unsetenv(kBackendUrlEnv);
  EXPECT_FALSE(resolve_backend_url(std::nullopt).has_value());
  ::setenv(kBackendUrlEnv, "http://env:1", 1);
  EXPECT_EQ(resolve_backend_url(std::nullopt), "http://env:1");
  EXPECT_EQ(resolve_backend_url(std::string("http://flag:2")), "http://flag:2");
  ::unsetenv(kBackendUrlEnv);

  const RemoteEndpoint e = split_endpoint("http://host:9/api/");
  EXPECT_EQ(e.scheme_host_port, "http://host:9");
  EXPECT_EQ(e.base_path, "/api");
  EXPECT_EQ(split_endpoint("http://host:9").base_path, "");
}
