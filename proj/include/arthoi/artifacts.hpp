// Per-stage pipeline artifacts written into the bundle directory:
// segmentation outputs, articulation trajectory, refined body and the
// metric report. Shared by the CLI and the test suites.

#pragma once

#include <string>

#include "arthoi/bundle.hpp"
#include "arthoi/config.hpp"
#include "arthoi/metrics.hpp"
#include "arthoi/segmentation.hpp"
#include "arthoi/simulate.hpp"
#include "arthoi/stage1.hpp"
#include "arthoi/stage2.hpp"

namespace arthoi {

/// Thrown when a prerequisite artifact is absent; the message names the
/// missing file and the command that produces it.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_segmentation(const std::string& bundle_dir,
                        const SegmentationResult& seg);
SegmentationResult read_segmentation(const std::string& bundle_dir);

void write_stage1(const std::string& bundle_dir,
                  const ArticulationTrajectory& traj);
ArticulationTrajectory read_stage1(const std::string& bundle_dir);

void write_stage2(const std::string& bundle_dir, const Stage2Result& result);
BodyParams read_stage2_body(const std::string& bundle_dir);

/// Converts config values into the per-module config structs.
SceneDescriptor scene_from_config(const RunConfig& cfg);
SimulationParams sim_from_config(const RunConfig& cfg);
SegmentationConfig seg_from_config(const RunConfig& cfg);
Stage1Config stage1_from_config(const RunConfig& cfg);
Stage2Config stage2_from_config(const RunConfig& cfg);
MetricsConfig metrics_from_config(const RunConfig& cfg);
RenderConfig render_from_config(const RunConfig& cfg);

/// Runs the metric suite over whatever artifacts exist and writes
/// report.json. Requires groundtruth/ and stage1 output.
nlohmann::ordered_json evaluate_bundle(const std::string& bundle_dir,
                                       const RunConfig& cfg);

}  // namespace arthoi
