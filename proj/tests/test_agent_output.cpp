#include <doctest.h>

#include <random>

#include "raar/agent_output.hpp"
#include "raar/errors.hpp"
#include "test_support.hpp"

using namespace raar;

TEST_CASE("parse_agent_json handles the canonical fenced form") {
  auto response = parse_agent_json(
      "```json\n{\"response\":[{\"judgment\":\"fake\",\"reason\":\"r\"}]}\n```");
  REQUIRE(response.entries.size() == 1);
  CHECK(response.entries[0].judgment == "fake");
  CHECK(response.entries[0].reason == "r");
}

TEST_CASE("parse_agent_json tolerates the instructed trailing comma") {
  auto response = parse_agent_json(
      "```json\n{\n\"response\": [\n    {\"judgment\": \"legit\", \"reason\": \"x\"},\n]\n}\n```");
  REQUIRE(response.entries.size() == 1);
  CHECK(response.entries[0].judgment == "legit");
}

TEST_CASE("parse_agent_json fuzz: prose wrappings recover the payload") {
  std::mt19937 gen(404);
  const std::vector<std::string> prefixes = {
      "", "Sure! Here's my analysis.\n\n", "Let me think about this.\n",
      "Answer below:\n```json\n",  // fenced variant
      "The JSON you asked for: "};
  const std::vector<std::string> suffixes = {
      "", "\n\nHope this helps!", "\nLet me know if anything is unclear.",
      "\n```\nDone.", " That is all."};
  for (int trial = 0; trial < 200; ++trial) {
    std::string judgment = "label" + std::to_string(gen() % 50);
    std::string reason = "because of reason " + std::to_string(gen() % 1000);
    json payload = json{
        {"response",
         json::array({json{{"judgment", judgment}, {"reason", reason}}})}};
    const std::string& prefix = prefixes[gen() % prefixes.size()];
    const std::string& suffix = suffixes[gen() % suffixes.size()];
    // Keep fences balanced: a fenced prefix pairs with the closing-fence suffix.
    bool fenced_prefix = prefix.find("```") != std::string::npos;
    std::string text = prefix + payload.dump() +
                       (fenced_prefix ? "\n```" : std::string()) + suffix;
    auto parsed = parse_agent_json(text);
    REQUIRE(parsed.entries.size() == 1);
    CHECK(parsed.entries[0].judgment == judgment);
    CHECK(parsed.entries[0].reason == reason);
  }
}

TEST_CASE("parse_agent_json rejects bad shapes") {
  SUBCASE("empty entries") {
    try {
      parse_agent_json("{\"response\":[]}");
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kSchemaError);
    }
  }
  SUBCASE("no JSON at all") {
    try {
      parse_agent_json("I refuse to answer in JSON.");
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParseError);
    }
  }
  SUBCASE("missing reason") {
    CHECK_THROWS_AS(parse_agent_json("{\"response\":[{\"judgment\":\"x\"}]}"), Error);
  }
  SUBCASE("empty judgment") {
    CHECK_THROWS_AS(
        parse_agent_json("{\"response\":[{\"judgment\":\"\",\"reason\":\"r\"}]}"),
        Error);
  }
}

TEST_CASE("parse round-trips its own canonical serialization") {
  AgentJsonResponse response;
  response.entries.push_back(AgentJsonEntry{"fake", "tabloid style"});
  response.entries.push_back(AgentJsonEntry{"legit", "sober tone, quotes"});
  auto back = parse_agent_json(serialize(response));
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].reason == "sober tone, quotes");
  CHECK(serialize(back) == serialize(response));
}

TEST_CASE("parse_summary_cot accepts the minimal shape in order") {
  std::string text = testsupport::cot_json("The text is fake.", "compare tones");
  CotActionList cot = parse_summary_cot(text);
  REQUIRE(cot.steps.size() == 3);
  CHECK(cot.steps[0].action == CotAction::kInnerThinking);
  CHECK(cot.steps[0].title == "Assess");
  CHECK(cot.steps[1].action == CotAction::kFinalConclusion);
  CHECK(cot.steps[2].action == CotAction::kVerification);
  CHECK(final_answer_of(cot) == "The text is fake.");
}

TEST_CASE("parse_summary_cot accepts a leading Verification (continuation)") {
  json j = json{{"CoT", json::array({
                            json{{"action", "Verification"},
                                 {"content", "The previous conclusion fails."}},
                            json{{"action", "Inner Thinking"},
                                 {"title", "Revisit"},
                                 {"content", "rechecking the style cues"}},
                            json{{"action", "Final Conclusion"},
                                 {"content", "It is legit."}},
                            json{{"action", "Verification"},
                                 {"content", "Now consistent."}},
                        })}};
  CotActionList cot = parse_summary_cot(j.dump());
  CHECK(cot.steps.size() == 4);
  CHECK(cot.steps.front().action == CotAction::kVerification);
}

TEST_CASE("parse_summary_cot schema failures") {
  SUBCASE("no Final Conclusion") {
    json j = json{{"CoT", json::array({json{{"action", "Inner Thinking"},
                                            {"title", "T"},
                                            {"content", "c"}},
                                       json{{"action", "Verification"},
                                            {"content", "v"}}})}};
    try {
      parse_summary_cot(j.dump());
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kSchemaError);
    }
  }
  SUBCASE("unknown action string") {
    json j = json{{"CoT", json::array({json{{"action", "Daydream"},
                                            {"content", "c"}}})}};
    CHECK_THROWS_AS(parse_summary_cot(j.dump()), Error);
  }
  SUBCASE("Inner Thinking without title") {
    json j = json{{"CoT", json::array({json{{"action", "Inner Thinking"},
                                            {"content", "c"}},
                                       json{{"action", "Final Conclusion"},
                                            {"content", "f"}},
                                       json{{"action", "Verification"},
                                            {"content", "v"}}})}};
    CHECK_THROWS_AS(parse_summary_cot(j.dump()), Error);
  }
  SUBCASE("does not end with Verification") {
    json j = json{{"CoT", json::array({json{{"action", "Inner Thinking"},
                                            {"title", "T"},
                                            {"content", "c"}},
                                       json{{"action", "Final Conclusion"},
                                            {"content", "f"}}})}};
    CHECK_THROWS_AS(parse_summary_cot(j.dump()), Error);
  }
}

TEST_CASE("final_answer_of: the last Final Conclusion wins") {
  json j = json{{"CoT", json::array({
                            json{{"action", "Inner Thinking"},
                                 {"title", "A"},
                                 {"content", "first pass"}},
                            json{{"action", "Final Conclusion"},
                                 {"content", "fake"}},
                            json{{"action", "Verification"},
                                 {"content", "shaky"}},
                            json{{"action", "Inner Thinking"},
                                 {"title", "B"},
                                 {"content", "second pass"}},
                            json{{"action", "Final Conclusion"},
                                 {"content", "legit"}},
                            json{{"action", "Verification"},
                                 {"content", "holds"}},
                        })}};
  CHECK(final_answer_of(parse_summary_cot(j.dump())) == "legit");
}

TEST_CASE("format_cot_text keeps step order and titles") {
  CotActionList cot = parse_summary_cot(testsupport::cot_json("verdict", "step one"));
  std::string text = format_cot_text(cot);
  CHECK(text.find("Inner Thinking (Assess): step one") != std::string::npos);
  CHECK(text.find("Final Conclusion: verdict") != std::string::npos);
}
