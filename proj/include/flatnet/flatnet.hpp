#pragma once

#include "flatnet/data.hpp"
#include "flatnet/diff.hpp"
#include "flatnet/errors.hpp"
#include "flatnet/loss.hpp"
#include "flatnet/matrix.hpp"
#include "flatnet/metrics.hpp"
#include "flatnet/net.hpp"
#include "flatnet/net_io.hpp"
#include "flatnet/quadrature.hpp"
#include "flatnet/report.hpp"
#include "flatnet/spectrum.hpp"
#include "flatnet/stats.hpp"
#include "flatnet/svg.hpp"
#include "flatnet/sweep.hpp"
#include "flatnet/theory.hpp"
#include "flatnet/train.hpp"
