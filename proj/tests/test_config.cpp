#include "arthoi/config.hpp"

#include <set>

#include "doctest.h"

using namespace arthoi;
using nlohmann::json;

TEST_CASE("defaults carry the published hyperparameters") {
  const RunConfig cfg;
  CHECK(cfg.lambda_r == 1.0);
  CHECK(cfg.lambda_tr == 2.0);
  CHECK(cfg.lambda_a == 0.05);
  CHECK(cfg.lambda_s1 == 1.0);
  CHECK(cfg.lr_stage1 == 1e-4);
  CHECK(cfg.iters_per_frame == 200);
  CHECK(cfg.lr_pose == 1e-3);
  CHECK(cfg.lr_root == 1e-4);
  CHECK(cfg.lambda_s2 == 1e4);
  CHECK(cfg.lambda_k == 1e4);
  CHECK(cfg.lambda_p == 1.0);
  CHECK(cfg.lambda_fs == 10.0);
  CHECK(cfg.lambda_c == 1e5);
  CHECK(cfg.iters_stage2 == 1000);
  CHECK(cfg.tau_dynamic == 5.0);
  CHECK(cfg.tau_static == 2.0);
  CHECK(cfg.qs_percentile == 10.0);
  CHECK(cfg.qs_min_px == 1.0);
  CHECK(cfg.binding_radius == 0.05);
  CHECK(cfg.grad_clip_norm == 1.0);
  CHECK(cfg.slide_threshold == 0.001);
  CHECK(cfg.fps == 30.0);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(load_config(json::parse(R"({"lambda_q": 1.0})")),
                  ConfigError);
  CHECK_THROWS_AS(load_config(json::parse(R"({"lambda_a": "soup"})")),
                  ConfigError);
}

TEST_CASE("config round trips through JSON") {
  RunConfig cfg;
  cfg.lambda_a = 0.125;
  cfg.frames = 17;
  cfg.scene_template = "drawer";
  const auto j = config_to_json(cfg);
  const RunConfig back = load_config(j);
  CHECK(back.lambda_a == 0.125);
  CHECK(back.frames == 17);
  CHECK(back.scene_template == "drawer");
  CHECK(config_to_json(back) == j);
}

TEST_CASE("set-style overrides") {
  RunConfig cfg;
  apply_override(&cfg, "lambda_tr=3.5");
  apply_override(&cfg, "frames=10");
  apply_override(&cfg, "scene_template=drawer");
  CHECK(cfg.lambda_tr == 3.5);
  CHECK(cfg.frames == 10);
  CHECK(cfg.scene_template == "drawer");
  CHECK_THROWS_AS(apply_override(&cfg, "nonsense=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(&cfg, "lambda_tr"), ConfigError);
}

TEST_CASE("every registry field is unique and hash is stable") {
  const auto& fields = config_fields();
  std::set<std::string> names;
  for (const auto& f : fields) CHECK(names.insert(f.name).second);
  const RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  RunConfig c;
  c.seed = 999;
  CHECK(config_hash(a) != config_hash(c));
}
