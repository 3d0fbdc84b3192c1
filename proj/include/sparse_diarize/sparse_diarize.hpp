#pragma once

#include "sparse_diarize/assignment.hpp"
#include "sparse_diarize/decoder.hpp"
#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/metrics.hpp"
#include "sparse_diarize/optimizer.hpp"
#include "sparse_diarize/pipeline.hpp"
#include "sparse_diarize/rank_estimation.hpp"
#include "sparse_diarize/rttm.hpp"
#include "sparse_diarize/signal.hpp"
#include "sparse_diarize/signal_io.hpp"
#include "sparse_diarize/simulator.hpp"
#include "sparse_diarize/timeline.hpp"
