#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpmab/config.hpp"

using namespace mpmab;
using nlohmann::json;

namespace {

json desk_json() {
  std::ifstream in(std::string(MPMAB_SOURCE_DIR) + "/configs/desk_2x2.json");
  return json::parse(in);
}

bool mentions(const std::vector<std::string>& msgs, const std::string& key) {
  for (const auto& m : msgs)
    if (m.find(key) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("desk config is valid") {
  const auto r = load_config(std::string(MPMAB_SOURCE_DIR) + "/configs/desk_2x2.json");
  REQUIRE(r.errors.empty());
  REQUIRE(r.config.has_value());
  CHECK_FALSE(mentions(r.warnings, "separability"));
  const auto& c = *r.config;
  CHECK(c.table.num_players() == 2);
  CHECK(c.table.mean(1, 1, 1) == 0.6);
  CHECK(c.reward.sigma == 0.05);
  CHECK(c.schedule.eps == 0.1);
  CHECK_FALSE(c.schedule.T0.has_value());
  CHECK(c.horizon == 1000000);
  CHECK(c.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("too many players is fatal") {
  auto j = desk_json();
  j["instance"]["K"] = 5;
  const auto r = validate_config(j.dump());
  CHECK_FALSE(r.config.has_value());
  CHECK(mentions(r.errors, "K"));
}

TEST_CASE("schedule ranges are fatal") {
  auto j = desk_json();
  j["schedule"]["delta"] = 1.5;
  auto r = validate_config(j.dump());
  CHECK(mentions(r.errors, "schedule.delta"));

  j = desk_json();
  j["schedule"]["exp_c"] = 4;
  r = validate_config(j.dump());
  CHECK(mentions(r.errors, "schedule.exp_c"));

  j = desk_json();
  j["schedule"]["exp_c"] = 4.5;
  CHECK(validate_config(j.dump()).config.has_value());
}

TEST_CASE("means must decrease with occupancy") {
  auto j = desk_json();
  j["instance"]["mu"][0] = {0.3, 0.9};
  CHECK_FALSE(validate_config(j.dump()).config.has_value());
  j["instance"]["mu"][0] = {0.0, 0.2};
  CHECK_FALSE(validate_config(j.dump()).config.has_value());
  j["instance"]["mu"][0] = {1.2, 0.2};
  CHECK_FALSE(validate_config(j.dump()).config.has_value());
}

TEST_CASE("parse errors and wrong types") {
  CHECK(mentions(validate_config("{ not json").errors, "parse error"));
  CHECK_FALSE(validate_config("[1,2]").errors.empty());
  auto j = desk_json();
  j["schedule"]["eps"] = "small";
  CHECK(mentions(validate_config(j.dump()).errors, "schedule.eps"));
  j = desk_json();
  j["instance"].erase("mu");
  CHECK(mentions(validate_config(j.dump()).errors, "instance.mu"));
}

TEST_CASE("warnings do not block a run") {
  auto j = desk_json();
  j["separability"]["c_sep"] = 5.0;
  const auto r = validate_config(j.dump());
  CHECK(r.config.has_value());
  CHECK(mentions(r.warnings, "separability"));

  j = desk_json();
  j["known_bounds"] = {{"delta", 0.5}};
  CHECK(mentions(validate_config(j.dump()).warnings, "known_bounds.delta"));
}

TEST_CASE("ties without known bounds") {
  json j = {{"instance", {{"K", 2}, {"M", 2}, {"N", 1}, {"mu", {{0.5}, {0.5}, {0.5}, {0.5}}}}}};
  auto r = validate_config(j.dump());
  CHECK(mentions(r.warnings, "not unique"));
  CHECK(mentions(r.errors, "known_bounds.delta"));
  j["known_bounds"] = {{"delta", 0.01}};
  r = validate_config(j.dump());
  CHECK(r.config.has_value());
}

TEST_CASE("missing file") {
  CHECK_FALSE(load_config("/nonexistent/config.json").errors.empty());
}
