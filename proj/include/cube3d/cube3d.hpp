#pragma once

// Everything except the command-line front end (cube3d/cli.hpp).

#include "cube3d/data/annotations.hpp"
#include "cube3d/data/classes.hpp"
#include "cube3d/data/cubes.hpp"
#include "cube3d/data/frames.hpp"
#include "cube3d/data/manifest.hpp"
#include "cube3d/data/stats.hpp"
#include "cube3d/data/synth.hpp"
#include "cube3d/metrics/confusion.hpp"
#include "cube3d/metrics/report.hpp"
#include "cube3d/metrics/roc.hpp"
#include "cube3d/model/audit.hpp"
#include "cube3d/model/checkpoint.hpp"
#include "cube3d/model/net.hpp"
#include "cube3d/train/config.hpp"
#include "cube3d/train/inference.hpp"
#include "cube3d/train/sgd.hpp"
#include "cube3d/train/trainer.hpp"
