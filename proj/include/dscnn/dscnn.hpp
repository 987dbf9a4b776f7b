#pragma once

// Umbrella header: the full depth-CNN scene recognition toolkit.

#include "dscnn/artifacts.hpp"
#include "dscnn/checkpoint.hpp"
#include "dscnn/classifier.hpp"
#include "dscnn/dataset.hpp"
#include "dscnn/diagnostics.hpp"
#include "dscnn/fusion.hpp"
#include "dscnn/gradcheck.hpp"
#include "dscnn/image_io.hpp"
#include "dscnn/lstm.hpp"
#include "dscnn/manifest.hpp"
#include "dscnn/metrics.hpp"
#include "dscnn/model.hpp"
#include "dscnn/ops.hpp"
#include "dscnn/optimizer.hpp"
#include "dscnn/preprocess.hpp"
#include "dscnn/spp.hpp"
#include "dscnn/synthetic.hpp"
#include "dscnn/tensor.hpp"
#include "dscnn/trainer.hpp"
#include "dscnn/video.hpp"
