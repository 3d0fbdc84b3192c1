#pragma once

// End-to-end diarization of one embedding signal: rank estimate (unless k
// is given), sparse factorization, decoding.

#include <cstddef>
#include <optional>

#include "sparse_diarize/decoder.hpp"
#include "sparse_diarize/optimizer.hpp"
#include "sparse_diarize/rank_estimation.hpp"
#include "sparse_diarize/signal.hpp"

namespace sparse_diarize {

struct PipelineOptions {
  std::optional<std::size_t> k;  // overrides the spectrum-based budget
  RankEstimationOptions rank;
  Hyperparams hyperparams;
  DecodeOptions decode;
};

struct PipelineResult {
  std::optional<SpectrumReport> spectrum;
  std::size_t k = 0;
  Factorization factorization;
  Diarization diarization;
};

inline PipelineResult run_pipeline(const EmbeddingSignal& signal, const PipelineOptions& options,
                                   const ProgressCallback& progress = {}) {
  PipelineResult out;
  if (options.k) {
    if (*options.k == 0) throw InvalidArgument("k must be at least 1");
    out.k = *options.k;
  } else {
    out.spectrum = estimate_max_speakers(signal, options.rank);
    out.k = out.spectrum->k_max;
  }
  out.factorization = factorize(signal, out.k, options.hyperparams, progress);
  out.diarization = decode(out.factorization.activations, signal.grid(), options.decode);
  return out;
}

}  // namespace sparse_diarize
