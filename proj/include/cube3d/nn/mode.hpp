#pragma once

namespace cube3d::nn {

// train: batch statistics, live dropout. eval: running statistics, identity dropout.
enum class Mode { train, eval };

}  // namespace cube3d::nn
