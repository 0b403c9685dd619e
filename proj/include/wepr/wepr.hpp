#pragma once

#include "wepr/common.hpp"
#include "wepr/corpus_ops.hpp"
#include "wepr/metrics.hpp"
#include "wepr/normalizer.hpp"
#include "wepr/phonetic_align.hpp"
#include "wepr/pipeline.hpp"
#include "wepr/reporting.hpp"
#include "wepr/transcript.hpp"
