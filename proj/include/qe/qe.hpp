#pragma once

#include "qe/cu_layout.hpp"
#include "qe/error.hpp"
#include "qe/frame.hpp"
#include "qe/metrics.hpp"
#include "qe/model_registry.hpp"
#include "qe/nn.hpp"
#include "qe/parallel.hpp"
#include "qe/pipeline.hpp"
#include "qe/qp_map.hpp"
#include "qe/selection.hpp"
#include "qe/signaling.hpp"
#include "qe/yuv.hpp"
