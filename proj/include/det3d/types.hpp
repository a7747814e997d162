#pragma once

#include <string>

#include "det3d/geom.hpp"

namespace det3d {

/// Annotated object: an oriented box with a class label.
struct GroundTruthObject {
  geom::Box3D box{0, 0, 0, 1, 1, 1, 0};
  int class_id = 0;
};

/// Scored, class-labeled box produced by a detector or a fusion stage.
/// model_id tags the source model in multi-model pipelines; empty = unset.
struct Detection {
  geom::Box3D box{0, 0, 0, 1, 1, 1, 0};
  int class_id = 0;
  double score = 0.0;
  std::string model_id;
};

}  // namespace det3d
