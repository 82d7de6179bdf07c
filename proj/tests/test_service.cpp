#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

#include "gwl/experiment.hpp"
#include "gwl/http_server.hpp"
#include "gwl/service.hpp"
#include "parity.hpp"
#include "support.hpp"

using namespace gwl;
using namespace gwl::service;
using dialogue::DialogueMove;
using dialogue::Speaker;
namespace act = dialogue::act;

namespace {

const Dataset& toy() {
  static const Dataset d = testing_support::toy_dataset(40, 5, true);
  return d;
}

DialogueMove T(dialogue::Act a) { return {Speaker::Tutor, std::move(a)}; }
DialogueMove L(dialogue::Act a) { return {Speaker::Learner, std::move(a)}; }

dialogue::DialogueState pending(dialogue::Act a) {
  dialogue::DialogueState st;
  st.pending = L(std::move(a));
  return st;
}

}  // namespace

TEST_CASE("tutor utterance parsing") {
  const dialogue::DialogueState none;
  CHECK(parse_tutor_utterance("What colour is this?", none) == T(act::AskWh{Category::Colour}));
  CHECK(parse_tutor_utterance("what color is it", none) == T(act::AskWh{Category::Colour}));
  CHECK(parse_tutor_utterance("What shape is this", none) == T(act::AskWh{Category::Shape}));
  CHECK(parse_tutor_utterance("so this is", none) == T(act::Continuation{Category::Colour}));
  CHECK(parse_tutor_utterance("So this is a...", none) == T(act::Continuation{Category::Shape}));

  const auto asked = pending(act::AskWh{Category::Colour});
  CHECK(parse_tutor_utterance("it is red", asked) == T(act::Inform{{Attribute::Red}}));
  CHECK(parse_tutor_utterance("A red square.", asked) == T(act::Inform{{Attribute::Red, Attribute::Square}}));

  const auto claim = pending(act::Assert{{Attribute::Green}, false});
  CHECK(parse_tutor_utterance("yes", claim) == T(act::Confirm{}));
  CHECK(parse_tutor_utterance("No", claim) == T(act::Reject{}));
  CHECK(parse_tutor_utterance("no, it is blue", claim) == T(act::Correct{{Attribute::Blue}}));
  CHECK(parse_tutor_utterance("it is green", claim) == T(act::Confirm{}));
  CHECK(parse_tutor_utterance("it is blue", claim) == T(act::Correct{{Attribute::Blue}}));

  for (const char* bad : {"what?", "", "purple elephant banana square circle", "so this is maybe", "it is red blue"}) {
    try {
      parse_tutor_utterance(bad, claim);
      FAIL("accepted: " << bad);
    } catch (const ServiceError& e) {
      CHECK(e.kind() == ErrorKind::Parse);
      CHECK(e.patterns() == accepted_patterns());
    }
  }
}

TEST_CASE("session options") {
  const auto d = parse_session_options(nullptr);
  CHECK(dialogue::condition_name(d.settings) == "L+UC+CD");
  CHECK(d.settings.bands.positive == 0.9);
  const auto o = parse_session_options({{"condition", "T-UC-CD"}, {"positive_threshold", 0.8}, {"objects", {1, 2}}});
  CHECK(dialogue::condition_name(o.settings) == "T-UC-CD");
  CHECK(o.settings.bands.positive == 0.8);
  CHECK(o.objects == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(parse_session_options({{"condition", "sideways"}}), ServiceError);
  CHECK_THROWS_AS(parse_session_options({{"positive_threshold", 0.2}}), ServiceError);
  CHECK_THROWS_AS(parse_session_options({{"objects", "all"}}), ServiceError);
}

TEST_CASE("session lifecycle") {
  TutorService svc(toy());
  const auto id = svc.create_session(parse_session_options({{"objects", {0, 1, 2}}}));
  auto st = svc.get_state(id);
  // A fresh learner has no classifiers: it opens with a colour question.
  CHECK(st["turn"] == "tutor");
  REQUIRE(st["transcript"].size() == 1);
  CHECK(st["transcript"][0]["move"] == "AskWh(colour)");
  CHECK(st["cumulative_cost"] == 2.0);
  CHECK(st["object"]["index"] == 0);

  const auto colour = std::string(name(toy().specs[0].color));
  const auto shape = std::string(name(toy().specs[0].shape));

  CHECK_THROWS_AS(svc.advance_object(id), ServiceError);

  auto r = svc.post_tutor_utterance(id, "It is " + colour + "!");
  CHECK(r.tutor.utterance.move == T(act::Inform{{toy().specs[0].color}}));
  CHECK(r.tutor.raw == "It is " + colour + "!");
  CHECK(r.tutor.cost == 2.0);  // canonical "red", not the typed words
  REQUIRE(r.learner.size() == 1);
  CHECK(r.learner[0].utterance.move == L(act::AskWh{Category::Shape}));
  CHECK(r.cost_delta == 4.0);
  CHECK(r.state["transcript"].size() == 3);
  CHECK(r.state["settled"]["colour"] == "agreed");

  try {
    svc.post_tutor_utterance(id, "what?");
    FAIL("parse error expected");
  } catch (const ServiceError& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }

  r = svc.post_tutor_utterance(id, "a " + shape);
  CHECK(r.state["ended"] == true);
  CHECK(r.state["turn"].is_null());
  CHECK(r.state["objects_completed"] == 1);
  const auto reg = svc.registry(id);
  CHECK(reg.contains(toy().specs[0].color));
  CHECK(reg.contains(toy().specs[0].shape));
  for (const auto& c : r.state["confidences"]) {
    const auto a = *parse_attribute(c["attribute"].get<std::string>());
    CHECK(c["prob"].get<double>() == reg.prob(a, toy().features[0]));
  }

  try {
    svc.post_tutor_utterance(id, "yes");
    FAIL("protocol error expected");
  } catch (const ServiceError& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }

  st = svc.advance_object(id);
  CHECK(st["object"]["index"] == 1);
  CHECK(st["object"]["position"] == 1);

  CHECK_THROWS_AS(svc.get_state("nope"), ServiceError);

  const auto events = svc.events_after(id, 0, std::chrono::milliseconds(0));
  REQUIRE(events.size() >= 6);
  CHECK(events[0].type == "session");
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
  CHECK(std::any_of(events.begin(), events.end(), [](const Event& e) { return e.type == "dialogue_end"; }));
  CHECK(svc.events_after(id, events.back().seq, std::chrono::milliseconds(10)).empty());
}

TEST_CASE("model save and load") {
  const auto path = std::filesystem::temp_directory_path() / "gwl_test_service_model.json";
  ServiceConfig cfg;
  cfg.model_path = path;
  TutorService svc(toy(), cfg);
  const auto a = svc.create_session(parse_session_options({{"objects", {3}}}));
  svc.post_tutor_utterance(a, std::string(name(toy().specs[3].color)));
  svc.post_tutor_utterance(a, "a " + std::string(name(toy().specs[3].shape)));
  CHECK(svc.save(a) == path);
  const auto b = svc.create_session(parse_session_options({{"load_model", true}}));
  CHECK(svc.registry(b) == svc.registry(a));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(svc.create_session(parse_session_options({{"load_model", true}})), ServiceError);
}

TEST_CASE("shared registry sessions learn together") {
  TutorService svc(toy());
  const auto a = svc.create_session(parse_session_options({{"shared_registry", true}, {"objects", {4}}}));
  const auto b = svc.create_session(parse_session_options({{"shared_registry", true}, {"objects", {5}}}));
  svc.post_tutor_utterance(a, std::string(name(toy().specs[4].color)));
  CHECK(svc.registry(b) == svc.registry(a));
  const auto c = svc.create_session(parse_session_options({{"objects", {6}}}));
  CHECK(svc.registry(c).size() == 0);
}

TEST_CASE("service matches the simulator on every condition") {
  for (const auto& s : dialogue::factorial_conditions()) {
    const auto r = parity::compare(toy(), s, 12, 77);
    CHECK_MESSAGE(r.identical, dialogue::condition_name(s) << ": " << r.detail);
  }
}

TEST_CASE("http front end") {
  TutorService svc(toy());
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread serving([&] { server.serve(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Post("/sessions", R"({"objects":[7,8]})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto state = nlohmann::json::parse(res->body);
  const std::string id = state["id"];

  res = cli.Get("/sessions/" + id + "/state");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["transcript"].size() == 1);

  res = cli.Get("/sessions/" + id + "/object.png");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  CHECK(res->body.substr(1, 3) == "PNG");

  res = cli.Post("/sessions/" + id + "/utterance", R"({"text":"what?"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 422);
  const auto err = nlohmann::json::parse(res->body);
  CHECK(err["kind"] == "parse");
  CHECK(err["accepted_patterns"].size() == accepted_patterns().size());

  res = cli.Post("/sessions/" + id + "/utterance", R"({"txt":"red"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/sessions/" + id + "/utterance", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/sessions/" + id + "/advance", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  res = cli.Get("/sessions/zzz/state");
  REQUIRE(res);
  CHECK(res->status == 404);

  const nlohmann::json body{{"text", std::string(name(toy().specs[7].color))}};
  res = cli.Post("/sessions/" + id + "/utterance", body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto posted = nlohmann::json::parse(res->body);
  CHECK(posted["tutor"]["move"].get<std::string>().rfind("Inform", 0) == 0);
  CHECK(posted["learner"].size() == 1);

  // Event stream: resume after the first event and read until the last turn.
  std::string stream;
  httplib::Headers h{{"Last-Event-ID", "1"}};
  cli.set_read_timeout(5, 0);
  cli.Get("/sessions/" + id + "/events", h, [&](const char* data, std::size_t n) {
    stream.append(data, n);
    return stream.find("id: 4\n") == std::string::npos;
  });
  CHECK(stream.find("id: 1\n") == std::string::npos);
  CHECK(stream.find("id: 2\nevent: turn\ndata: {") != std::string::npos);
  CHECK(stream.find("id: 4\nevent: turn\n") != std::string::npos);

  server.stop();
  serving.join();
}
