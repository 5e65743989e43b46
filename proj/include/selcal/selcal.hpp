#pragma once

#include "selcal/basemodel.hpp"
#include "selcal/calmetrics.hpp"
#include "selcal/commands.hpp"
#include "selcal/config.hpp"
#include "selcal/dense.hpp"
#include "selcal/error.hpp"
#include "selcal/eval_harness.hpp"
#include "selcal/kernelstats.hpp"
#include "selcal/matrix.hpp"
#include "selcal/metafeatures.hpp"
#include "selcal/random.hpp"
#include "selcal/robust_trainer.hpp"
#include "selcal/selector.hpp"
#include "selcal/smmce_loss.hpp"
#include "selcal/synthdata.hpp"
#include "selcal/textio.hpp"
#include "selcal/threshold.hpp"
