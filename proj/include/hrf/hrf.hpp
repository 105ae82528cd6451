#pragma once

#include "hrf/corpus_store.hpp"
#include "hrf/error.hpp"
#include "hrf/eval.hpp"
#include "hrf/experiment.hpp"
#include "hrf/format.hpp"
#include "hrf/history.hpp"
#include "hrf/index.hpp"
#include "hrf/rewrite.hpp"
#include "hrf/testkit.hpp"
#include "hrf/text.hpp"
