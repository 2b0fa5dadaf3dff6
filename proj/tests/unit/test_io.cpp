#include <catch_amalgamated.hpp>

#include <sstream>

#include "casep/initdata.hpp"
#include "casep/io.hpp"

using namespace casep;

TEST_CASE("snapshot record schema") {
  auto h = height_from_config(Configuration({1, 3}, 2, {2, 0, 1}), 0);
  h.origin_current = -4;
  auto j = snapshot_json(h, 1.5);
  CHECK(j["t"] == 1.5);
  CHECK(j["J"] == 2);
  CHECK(j["origin"] == -4);
  CHECK(j["window"] == json::array({0, 3}));
  CHECK(j["heights"] == json::array({0, 2, 0, 0}));
  CHECK(height_from_json(j) == h);
  j["heights"].push_back(1);
  CHECK_THROWS_AS(height_from_json(j), IoError);
}

TEST_CASE("trajectory JSONL round trip") {
  auto [lo, hi] = ordered_bernoulli_pair(0.3, 0.7, {-20, 20}, 4);
  std::vector<HeightFunction> init{lo, hi};
  EvolveOptions opt{BoundaryMode::periodic, Scheduler::superposition, false, 0.75};
  auto tr = evolve_coupled(init, asep_model(0.25), 3.0, {0, 1, 2, 3}, 99, opt);
  std::stringstream ss;
  write_trajectory_jsonl(ss, tr);
  const std::string text = ss.str();
  auto back = read_trajectory_jsonl(ss);
  CHECK(back.seed == tr.seed);
  CHECK(back.boundary == BoundaryMode::periodic);
  CHECK(back.scheduler == Scheduler::superposition);
  CHECK(back.clock_rate == 0.75);
  CHECK(back.model.kind == "asep");
  CHECK(back.model.epsilon == 0.25);
  CHECK(back.snapshot_times == tr.snapshot_times);
  REQUIRE(back.snapshots.size() == tr.snapshots.size());
  for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
    CHECK(back.snapshots[j].heights == tr.snapshots[j].heights);
    CHECK(back.snapshots[j].replicas == tr.snapshots[j].replicas);
  }
  std::stringstream again;
  write_trajectory_jsonl(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed trajectory files") {
  std::stringstream empty;
  CHECK_THROWS_AS(read_trajectory_jsonl(empty), IoError);
  std::stringstream bad("{not json\n");
  CHECK_THROWS_AS(read_trajectory_jsonl(bad), IoError);
  auto h = bernoulli_height(0.5, {-3, 3}, 1);
  std::vector<HeightFunction> init{h, h};
  auto tr = evolve_coupled(init, asep_model(0.04), 0, {0}, 1);
  std::stringstream ss;
  write_trajectory_jsonl(ss, tr);
  std::string text = ss.str();
  text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::stringstream cut(text);
  CHECK_THROWS_AS(read_trajectory_jsonl(cut), IoError);
  CHECK_THROWS_AS(read_trajectory_jsonl(std::string("/nonexistent/x.jsonl")), IoError);
}
