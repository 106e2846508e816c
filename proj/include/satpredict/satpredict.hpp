#pragma once

#include "satpredict/cnf.hpp"
#include "satpredict/dataset.hpp"
#include "satpredict/error.hpp"
#include "satpredict/eval.hpp"
#include "satpredict/features.hpp"
#include "satpredict/nn.hpp"
#include "satpredict/plot.hpp"
#include "satpredict/synth.hpp"
#include "satpredict/trace.hpp"
#include "satpredict/watch.hpp"
