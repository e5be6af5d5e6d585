#include <gtest/gtest.h>

#include <cstdlib>

#include "illusory/client.hpp"
#include "illusory/evaluation.hpp"
#include "illusory/prompts.hpp"
#include "mock_server.hpp"
#include "test_util.hpp"

using namespace illusory;
using namespace illusory::testing;

namespace {

constexpr const char* kTokenEnv = "ILLUSORY_CLIENT_TEST_TOKEN";

EndpointConfig mock_config(const MockChatServer& server) {
  ::setenv(kTokenEnv, "test-token", 1);
  EndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.auth_token_env = kTokenEnv;
  cfg.timeout_s = 5.0;
  cfg.backoff_initial_s = 0.01;
  return cfg;
}

std::string data_url(const ImageBuffer& img) {
  return "data:image/png;base64," + base64_encode(encode_png(img));
}

}  // namespace

TEST(Base64, KnownVectors) {
  auto enc = [](std::string s) {
    return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foo"), "Zm9v");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
}

TEST(Prompts, GoldenText) {
  const auto mnist = *find_builtin_labelset("IllusionMNIST", false);
  const auto animals = *find_builtin_labelset("IllusionAnimals", false);
  EXPECT_EQ(build_prompt(TaskKind::Classification, Variant::Raw, &mnist),
            "Which class is in the picture: digit 0, digit 1, digit 2, digit 3, digit 4, digit 5, "
            "digit 6, digit 7, digit 8, digit 9. Just choose the correct class without any extra "
            "explanation.");
  EXPECT_EQ(build_prompt(TaskKind::Char, Variant::Raw, nullptr),
            "What sequence of characters are in the picture? Just say the sequence. Put your "
            "answer in quotation marks.");
  const std::string ill = build_prompt(TaskKind::Classification, Variant::Illusion, &animals);
  EXPECT_EQ(ill,
            "There might be an illusion of something in the image or not. These are the classes "
            "that an illusion might belong to: cat, dog, pigeon, butterfly, elephant, horse, deer, "
            "snake, fish, rooster, No illusion. Just choose the correct class without any extra "
            "explanation.");
  EXPECT_EQ(build_prompt(TaskKind::Classification, Variant::Filtered, &animals), ill);
  const std::string ch = build_prompt(TaskKind::Char, Variant::Illusion, nullptr);
  EXPECT_NE(ch.find("answer with \"No illusion\""), std::string::npos);
  EXPECT_THROW(build_prompt(TaskKind::Classification, Variant::Raw, nullptr), Error);
  // A set that already has "No illusion" does not list it for raw prompts.
  const auto with_none = *find_builtin_labelset("IllusionAnimals", true);
  EXPECT_EQ(build_prompt(TaskKind::Classification, Variant::Raw, &with_none),
            build_prompt(TaskKind::Classification, Variant::Raw, &animals));
}

TEST(Client, TokenFromEnvironmentOnly) {
  EndpointConfig cfg;
  cfg.auth_token_env = "ILLUSORY_DEFINITELY_UNSET_VAR";
  ::unsetenv(cfg.auth_token_env.c_str());
  try {
    resolve_token(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthError);
  }
  cfg.max_concurrent = 0;
  EXPECT_THROW(validate_endpoint(cfg), Error);
}

TEST(Client, WellFormedResponse) {
  MockChatServer server;
  const auto cfg = mock_config(server);
  const auto img = random_image(8, 8, 3, 1);
  const auto r = query_image(cfg, img, "what is it?", "s1");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.raw_text, "dog");
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_EQ(server.last_authorization(), "Bearer test-token");
  const auto body = server.last_body();
  EXPECT_EQ(body.at("model"), cfg.model_name);
  EXPECT_EQ(body.at("messages").at(0).at("content").at(0).at("text"), "what is it?");
  EXPECT_EQ(body.at("messages").at(0).at("content").at(1).at("image_url").at("url"), data_url(img));
}

TEST(Client, RetriesRateLimitThenSucceeds) {
  MockChatServer server;
  server.script({{429, "", 0.0, "0"}, {429, "", 0.0, ""}});
  const auto r = query_image(mock_config(server), random_image(4, 4, 3, 2), "q");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(server.requests(), 3);
}

TEST(Client, TimeoutWithoutRetry) {
  MockChatServer server;
  server.set_default({200, "late", 1.5});
  auto cfg = mock_config(server);
  cfg.retry_limit = 0;
  cfg.timeout_s = 0.2;
  const auto r = query_image(cfg, random_image(4, 4, 3, 3), "q");
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(*r.failure_reason, "Timeout");
  EXPECT_EQ(r.attempt_count, 1);
}

TEST(Client, RetryLimitBoundsAttempts) {
  MockChatServer server;
  server.set_default({503, ""});
  auto cfg = mock_config(server);
  cfg.retry_limit = 2;
  const auto r = query_image(cfg, random_image(4, 4, 3, 3), "q");
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(*r.failure_reason, "ServerError 503");
  EXPECT_EQ(r.attempt_count, 3);
}

TEST(Client, AuthFailureIsNotRetried) {
  MockChatServer server("other-token");
  const auto r = query_image(mock_config(server), random_image(4, 4, 3, 4), "q");
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(*r.failure_reason, "AuthError");
  EXPECT_EQ(r.attempt_count, 1);
}

TEST(Client, MalformedBody) {
  MockChatServer server;
  // A 200 whose content is missing: the server sends a choices array with no message.
  httplib::Server raw;
  raw.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  const int port = raw.bind_to_any_port("127.0.0.1");
  std::thread t([&] { raw.listen_after_bind(); });
  raw.wait_until_ready();
  auto cfg = mock_config(server);
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  const auto r = query_image(cfg, random_image(4, 4, 3, 5), "q");
  raw.stop();
  t.join();
  EXPECT_EQ(r.failure_reason.value_or(""), "MalformedResponse");
}

TEST(RunEvaluation, TranscriptConcurrencyAndResume) {
  MockChatServer server;
  server.set_numbered_answers(true);
  server.set_default({200, "", 0.05});
  auto cfg = mock_config(server);
  cfg.max_concurrent = 3;

  const auto dir = temp_dir("run_eval");
  const Manifest m = write_query_fixture(dir, 10);
  EvaluationOptions opt;
  opt.root = dir;
  const auto out = dir / "preds.jsonl";

  const auto first = run_evaluation(m, Variant::Illusion, cfg, out, opt);
  EXPECT_EQ(first.total, 10u);
  EXPECT_EQ(first.succeeded, 10u);
  EXPECT_EQ(first.new_requests, 10u);
  EXPECT_TRUE(first.failures.empty());
  EXPECT_LE(server.peak_in_flight(), 3);
  EXPECT_GE(server.peak_in_flight(), 2);

  const auto lines = load_predictions(out);
  ASSERT_EQ(lines.size(), 10u);
  const auto transcript = server.transcript();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i].sample_id, m.records[i].id);  // written in id order
    const auto img = prepare_image(m.records[i], Variant::Illusion, opt);
    EXPECT_EQ(lines[i].raw_text, transcript.at(data_url(img)));
  }

  const auto again = run_evaluation(m, Variant::Illusion, cfg, out, opt);
  EXPECT_EQ(again.new_requests, 0u);
  EXPECT_EQ(again.already_done, 10u);
  EXPECT_EQ(server.requests(), 10);
  EXPECT_EQ(load_predictions(out), lines);
}

TEST(RunEvaluation, FailuresAreRetriedOnRerun) {
  MockChatServer server;
  auto cfg = mock_config(server);
  cfg.retry_limit = 0;
  cfg.max_concurrent = 1;
  server.script({{200, "cat"}, {400, ""}, {200, "fish"}});

  const auto dir = temp_dir("run_eval_fail");
  const Manifest m = write_query_fixture(dir, 3);
  EvaluationOptions opt;
  opt.root = dir;
  const auto out = dir / "preds.jsonl";
  const auto first = run_evaluation(m, Variant::Raw, cfg, out, opt);
  EXPECT_EQ(first.succeeded, 2u);
  ASSERT_EQ(first.failures.size(), 1u);
  EXPECT_EQ(first.failures[0].second, "HttpError 400");

  const auto second = run_evaluation(m, Variant::Raw, cfg, out, opt);
  EXPECT_EQ(second.already_done, 2u);
  EXPECT_EQ(second.new_requests, 1u);
  EXPECT_EQ(load_predictions(out).size(), 3u);
}

TEST(RunEvaluation, TornTailIsRequeried) {
  MockChatServer server;
  const auto cfg = mock_config(server);
  const auto dir = temp_dir("run_eval_torn");
  const Manifest m = write_query_fixture(dir, 2);
  const auto out = dir / "preds.jsonl";
  const std::string partial =
      serialize_prediction({"q000", "cat"}) + "\n" + R"({"sample_id":"q001","raw)";
  write_file_bytes(out, std::vector<std::uint8_t>(partial.begin(), partial.end()));

  EvaluationOptions opt;
  opt.root = dir;
  const auto s = run_evaluation(m, Variant::Raw, cfg, out, opt);
  EXPECT_EQ(s.already_done, 1u);
  EXPECT_EQ(s.new_requests, 1u);
  const auto lines = load_predictions(out);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1], (PredictionLine{"q001", "dog"}));
}

TEST(RunEvaluation, MissingTokenFailsBeforeAnyRequest) {
  MockChatServer server;
  auto cfg = mock_config(server);
  cfg.auth_token_env = "ILLUSORY_DEFINITELY_UNSET_VAR";
  ::unsetenv(cfg.auth_token_env.c_str());
  const auto dir = temp_dir("run_eval_auth");
  const Manifest m = write_query_fixture(dir, 2);
  EvaluationOptions opt;
  opt.root = dir;
  try {
    run_evaluation(m, Variant::Raw, cfg, dir / "p.jsonl", opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthError);
  }
  EXPECT_EQ(server.requests(), 0);
}

TEST(RunEvaluation, EmptyManifest) {
  MockChatServer server;
  const auto cfg = mock_config(server);
  const auto dir = temp_dir("run_eval_empty");
  Manifest m;
  m.kind = TaskKind::Char;
  const auto s = run_evaluation(m, Variant::Raw, cfg, dir / "p.jsonl", {});
  EXPECT_EQ(s.total, 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "p.jsonl"));
  EXPECT_EQ(std::filesystem::file_size(dir / "p.jsonl"), 0u);
}

TEST(RunEvaluation, FilteredVariantSendsRevealedImage) {
  MockChatServer server;
  server.set_numbered_answers(true);
  const auto cfg = mock_config(server);
  const auto dir = temp_dir("run_eval_filtered");
  const Manifest m = write_query_fixture(dir, 1);
  EvaluationOptions opt;
  opt.root = dir;
  opt.filter.gaussian_ksize = 5;
  run_evaluation(m, Variant::Filtered, cfg, dir / "p.jsonl", opt);
  const auto expected = reveal(read_image(dir / m.records[0].image_path), opt.filter);
  EXPECT_TRUE(server.transcript().contains(data_url(expected)));
  const auto prompt = server.last_body().at("messages").at(0).at("content").at(0).at("text");
  EXPECT_EQ(prompt, build_prompt(TaskKind::Classification, Variant::Filtered, &*m.labels));

  // Pre-filtered copies are reused and can be sent as three channels.
  const auto pre = dir / "pre";
  const auto marker = random_image(24, 24, 1, 77);
  write_image(pre / m.records[0].image_path, marker);
  opt.prefiltered_root = pre;
  opt.replicate_to_rgb = true;
  EXPECT_EQ(prepare_image(m.records[0], Variant::Filtered, opt), replicate_to_rgb(marker));
}

TEST(RunEvaluation, ShuffledPredictionsScoreIdentically) {
  MockChatServer server;
  server.script({{200, "cat"}, {200, "a dog"}, {200, "fish"}, {200, "no illusion"},
                 {200, "cat"}, {200, "unsure"}, {200, "dog"}, {200, "No illusion"}});
  const auto cfg = mock_config(server);
  const auto dir = temp_dir("run_eval_shuffle");
  const Manifest m = write_query_fixture(dir, 8);
  EvaluationOptions opt;
  opt.root = dir;
  auto cfg1 = cfg;
  cfg1.max_concurrent = 1;
  run_evaluation(m, Variant::Illusion, cfg1, dir / "p.jsonl", opt);
  auto lines = load_predictions(dir / "p.jsonl");
  const auto base = canonical_report(evaluate(m, lines, TaskKind::Classification));
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(lines.begin(), lines.end(), rng);
    EXPECT_EQ(canonical_report(evaluate(m, lines, TaskKind::Classification)), base);
  }
}
