// Command-line front end: estimate-k, diarize, eval, simulate, grid.
//
// Exit codes: 0 success, 2 usage, 3 I/O or format, 4 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "sparse_diarize/sparse_diarize.hpp"

namespace sd = sparse_diarize;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::optional<sd::SignalFormat> format_from_flag(const std::string& flag) {
  if (flag == "embsig") return sd::SignalFormat::kBinary;
  if (flag == "csv") return sd::SignalFormat::kCsv;
  return std::nullopt;  // auto-detect
}

sd::EmbeddingSignal load(const std::string& path, const std::string& format) {
  const auto f = format_from_flag(format);
  return f ? sd::load_signal(path, *f) : sd::load_signal(path);
}

void apply_thread_cap() {
  if (const char* env = std::getenv("SPARSE_DIARIZE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  }
}

struct EstimateArgs {
  std::string input;
  std::string format = "auto";
  double sensitivity = 1.0;
};

int run_estimate(const EstimateArgs& args) {
  const auto signal = load(args.input, args.format);
  sd::RankEstimationOptions opts;
  opts.sensitivity = args.sensitivity;
  const auto report = sd::estimate_max_speakers(signal, opts);
  std::string values;
  const std::size_t shown = std::min<std::size_t>(report.singular_values.size(), 64);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) values += ',';
    values += fmt("%.9g", report.singular_values[i]);
  }
  std::printf("singular_values=%s\n", values.c_str());
  std::printf("knee_index=%zu\n", report.knee_index);
  std::printf("k_max=%zu\n", report.k_max);
  return 0;
}

struct DiarizeArgs {
  std::string input;
  std::string output;
  std::string format = "auto";
  std::string file_id;
  std::size_t k = 0;  // 0 = estimate
  double sensitivity = 1.0;
  sd::Hyperparams hp;
  sd::DecodeOptions decode;
  bool quiet = false;
  std::size_t progress_every = 100;
};

int run_diarize(const DiarizeArgs& args) {
  const auto signal = load(args.input, args.format);
  sd::PipelineOptions opts;
  if (args.k > 0) opts.k = args.k;
  opts.rank.sensitivity = args.sensitivity;
  opts.hyperparams = args.hp;
  opts.decode = args.decode;

  sd::ProgressCallback progress;
  if (!args.quiet && args.progress_every > 0) {
    progress = [&](std::size_t iter, const sd::LossBreakdown& loss) {
      if (iter % args.progress_every == 0) {
        std::fprintf(stderr, "iter %zu total=%.6f reconstruction=%.6f jitter=%.6f\n", iter, loss.total,
                     loss.reconstruction, loss.jitter);
      }
    };
  }
  const auto result = sd::run_pipeline(signal, opts, progress);

  const std::string file_id = args.file_id.empty() ? fs::path(args.input).stem().string() : args.file_id;
  const fs::path rttm_path(args.output);
  const fs::path loss_path(args.output + ".loss.csv");
  sd::write_file_atomically(loss_path, sd::loss_trace_csv(result.factorization.trace));
  sd::write_file_atomically(rttm_path, result.diarization.to_rttm(file_id));

  const auto timeline = result.diarization.to_timeline();
  if (result.spectrum) std::printf("knee_index=%zu\n", result.spectrum->knee_index);
  std::printf("k=%zu\n", result.k);
  std::printf("iterations=%zu\n", result.factorization.iterations);
  std::printf("converged=%s\n", result.factorization.converged ? "true" : "false");
  std::printf("initial_loss=%.6f\n", result.factorization.trace.front().total);
  std::printf("final_loss=%.6f\n", result.factorization.trace.back().total);
  std::printf("speakers=%zu\n", timeline.speakers().size());
  std::printf("segments=%zu\n", result.diarization.segments.size());
  std::printf("rttm=%s\n", rttm_path.string().c_str());
  std::printf("loss_trace=%s\n", loss_path.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string reference;
  std::string hypothesis;
  double duration = 0.0;  // 0 = longest extent per file
  double collar = 0.0;
};

void print_row(const std::string& scope, const sd::MetricReport& r) {
  std::printf("%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", scope.c_str(), r.der.der,
              r.der.false_alarm_seconds, r.der.missed_seconds, r.der.confusion_seconds, r.purity,
              r.coverage, r.f);
}

void print_keys(const std::string& prefix, const sd::MetricReport& r) {
  const char* p = prefix.c_str();
  std::printf("%sder=%.6f\n", p, r.der.der);
  std::printf("%sfalse_alarm=%.6f\n", p, r.der.false_alarm_seconds);
  std::printf("%smissed=%.6f\n", p, r.der.missed_seconds);
  std::printf("%sconfusion=%.6f\n", p, r.der.confusion_seconds);
  std::printf("%spurity=%.6f\n", p, r.purity);
  std::printf("%scoverage=%.6f\n", p, r.coverage);
  std::printf("%sf=%.6f\n", p, r.f);
  if (r.purity_defaulted) std::printf("%spurity_defaulted=true\n", p);
  if (r.coverage_defaulted) std::printf("%scoverage_defaulted=true\n", p);
}

int run_eval(const EvalArgs& args) {
  auto refs = sd::parse_rttm_files(sd::read_file(args.reference));
  auto hyps = sd::parse_rttm_files(sd::read_file(args.hypothesis));

  // A file missing on one side is scored against an empty timeline.
  std::map<std::string, std::pair<sd::LabeledTimeline, sd::LabeledTimeline>> files;
  for (auto& [id, t] : refs) files[id].first = std::move(t);
  for (auto& [id, t] : hyps) files[id].second = std::move(t);
  if (files.empty()) files["-"];  // both sides silent

  std::vector<std::string> ids;
  std::vector<sd::MetricReport> reports;
  for (auto& [id, pair] : files) {
    auto& [ref, hyp] = pair;
    const double total = args.duration > 0.0 ? args.duration : std::max(ref.extent(), hyp.extent());
    if (args.duration > 0.0 && (ref.extent() > total + 1e-9 || hyp.extent() > total + 1e-9)) {
      throw sd::InvalidArgument("segments of '" + id + "' extend past --duration");
    }
    ref.set_total_duration(total);
    hyp.set_total_duration(total);
    ids.push_back(id);
    reports.push_back(sd::evaluate(ref, hyp, args.collar));
  }
  const auto corpus = sd::aggregate(reports);

  std::printf("files=%zu\n", corpus.files);
  print_keys("", corpus.micro);
  print_keys("macro_", corpus.macro);
  std::printf("\nscope,der,false_alarm,missed,confusion,purity,coverage,f\n");
  print_row("micro", corpus.micro);
  print_row("macro", corpus.macro);
  for (std::size_t i = 0; i < ids.size(); ++i) print_row(ids[i], reports[i]);
  return 0;
}

struct SimulateArgs {
  std::string prefix;
  std::string config;
  std::string format = "embsig";
  sd::SimScenario scenario;
};

int run_simulate(SimulateArgs args, const CLI::App& sub) {
  if (!args.config.empty()) {
    // Flags given explicitly on the command line win over the config file.
    sd::SimScenario from_file = sd::parse_scenario(sd::read_file(args.config));
    auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
    auto& s = args.scenario;
    if (!given("--speakers")) s.num_speakers = from_file.num_speakers;
    if (!given("--dim")) s.embedding_dim = from_file.embedding_dim;
    if (!given("--steps")) s.num_steps = from_file.num_steps;
    if (!given("--step-seconds")) s.step_seconds = from_file.step_seconds;
    if (!given("--window-seconds")) s.window_seconds = from_file.window_seconds;
    if (!given("--mean-turn-steps")) s.mean_turn_steps = from_file.mean_turn_steps;
    if (!given("--overlap-fraction")) s.overlap_fraction = from_file.overlap_fraction;
    if (!given("--silence-fraction")) s.silence_fraction = from_file.silence_fraction;
    if (!given("--noise-sigma")) s.noise_sigma = from_file.noise_sigma;
    if (!given("--seed")) s.seed = from_file.seed;
    if (!given("--mix-weight")) s.mix_weight = from_file.mix_weight;
    if (!given("--overlap-regions")) s.overlap_regions = from_file.overlap_regions;
    if (!given("--orthogonalize")) s.orthogonalize = from_file.orthogonalize;
  }
  const auto sim = sd::simulate(args.scenario);
  const bool csv = args.format == "csv";
  const fs::path signal_path(args.prefix + (csv ? ".csv" : ".embsig"));
  const fs::path rttm_path(args.prefix + ".rttm");
  const std::string file_id = fs::path(args.prefix).filename().string();
  sd::save_signal(sim.signal, signal_path, csv ? sd::SignalFormat::kCsv : sd::SignalFormat::kBinary);
  sd::write_file_atomically(rttm_path, sim.reference.to_rttm(file_id));

  const auto& s = args.scenario;
  std::printf("speakers=%zu\n", s.num_speakers);
  std::printf("dim=%zu\n", s.embedding_dim);
  std::printf("steps=%zu\n", s.num_steps);
  std::printf("step_seconds=%.6g\n", s.step_seconds);
  std::printf("overlap_steps=%zu\n", sim.overlap_steps.size());
  std::printf("silent_steps=%zu\n", static_cast<std::size_t>((sim.truth.colwise().sum().array() == 0.0).count()));
  std::printf("seed=%llu\n", static_cast<unsigned long long>(s.seed));
  std::printf("signal=%s\n", signal_path.string().c_str());
  std::printf("rttm=%s\n", rttm_path.string().c_str());
  return 0;
}

struct GridArgs {
  double duration = 0.0;
  double window = sd::kDefaultWindowSeconds;
  double max_step = sd::kDefaultMaxStepSeconds;
  std::size_t min_chunks = sd::kDefaultMinChunks;
};

int run_grid(const GridArgs& args) {
  const auto grid = sd::make_chunk_grid(args.duration, args.window, args.max_step, args.min_chunks);
  std::printf("step_seconds=%.17g\n", grid.step_seconds);
  std::printf("window_seconds=%.17g\n", grid.window_seconds);
  std::printf("num_chunks=%zu\n", grid.num_chunks);
  return 0;
}

void add_hyperparam_flags(CLI::App& cmd, DiarizeArgs& a) {
  auto& hp = a.hp;
  cmd.add_option("--lambda1", hp.lambda1, "l1 weight on the basis matrix")->capture_default_str();
  cmd.add_option("--lambda2", hp.lambda2, "l1 weight on the activations")->capture_default_str();
  cmd.add_option("--lambda3", hp.lambda3, "jitter weight")->capture_default_str();
  cmd.add_option("--lr-psi", hp.lr_psi, "Adam learning rate for the basis")->capture_default_str();
  cmd.add_option("--lr-a", hp.lr_a, "Adam learning rate for the activations")->capture_default_str();
  cmd.add_option("--lr-half-life", hp.lr_half_life,
                 "iterations per halving of both learning rates (0 = constant)")
      ->capture_default_str();
  cmd.add_option("--min-lr-fraction", hp.min_lr_fraction, "floor of the learning-rate schedule")
      ->capture_default_str();
  cmd.add_option("--max-iters", hp.max_iters, "iteration cap")->capture_default_str();
  cmd.add_option("--rel-tol", hp.rel_tol, "relative plateau tolerance")->capture_default_str();
  cmd.add_option("--patience", hp.patience, "plateau window length")->capture_default_str();
  cmd.add_option("--seed", hp.seed, "initialization seed")->capture_default_str();
  cmd.add_flag("--normalize-all-columns", hp.normalize_all_columns,
               "rescale every nonzero basis column to unit norm");
  cmd.add_option("--divergence-factor", hp.divergence_factor,
                 "abort once the loss exceeds this multiple of its initial value")
      ->capture_default_str();
  cmd.add_flag("--check-feasibility", hp.check_feasibility, "verify constraints after every step");
  cmd.add_option("--threshold", a.decode.threshold, "activation threshold")->capture_default_str();
  cmd.add_option("--min-segment-steps", a.decode.min_segment_steps, "shortest kept run, in steps")
      ->capture_default_str();
  cmd.add_option("--min-fraction", a.decode.min_fraction,
                 "drop rows lighter than this fraction of the heaviest")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-optimization speaker diarization over embedding signals"};
  app.require_subcommand(1);
  const std::vector<std::string> formats{"auto", "embsig", "csv"};

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate-k", "Estimate the speaker budget from the singular values");
  est_cmd->add_option("signal", est.input, "EMBSIG01 or CSV signal")->required();
  est_cmd->add_option("--format", est.format, "input format")->check(CLI::IsMember(formats))->capture_default_str();
  est_cmd->add_option("--sensitivity", est.sensitivity, "Kneedle sensitivity")->capture_default_str();

  DiarizeArgs dia;
  auto* dia_cmd = app.add_subcommand("diarize", "Factorize a signal and write an RTTM plus a loss trace");
  dia_cmd->add_option("signal", dia.input, "EMBSIG01 or CSV signal")->required();
  dia_cmd->add_option("-o,--out", dia.output, "output RTTM path (trace goes to <out>.loss.csv)")->required();
  dia_cmd->add_option("--format", dia.format, "input format")->check(CLI::IsMember(formats))->capture_default_str();
  dia_cmd->add_option("--k", dia.k, "basis size (default: estimated)")->check(CLI::PositiveNumber);
  dia_cmd->add_option("--sensitivity", dia.sensitivity, "Kneedle sensitivity")->capture_default_str();
  dia_cmd->add_option("--file-id", dia.file_id, "RTTM file id (default: input stem)");
  dia_cmd->add_option("--progress-every", dia.progress_every, "iterations between loss lines")->capture_default_str();
  dia_cmd->add_flag("-q,--quiet", dia.quiet, "no loss lines on stderr");
  add_hyperparam_flags(*dia_cmd, dia);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score a hypothesis RTTM against a reference RTTM");
  ev_cmd->add_option("reference", ev.reference, "reference RTTM")->required();
  ev_cmd->add_option("hypothesis", ev.hypothesis, "hypothesis RTTM")->required();
  ev_cmd->add_option("--duration", ev.duration, "recording length in seconds (default: longest extent)")
      ->check(CLI::NonNegativeNumber);
  ev_cmd->add_option("--collar", ev.collar, "no-score collar around reference boundaries")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic signal and its ground-truth RTTM");
  auto& sc = sim.scenario;
  sim_cmd->add_option("prefix", sim.prefix, "output prefix")->required();
  sim_cmd->add_option("--config", sim.config, "key=value scenario file");
  sim_cmd->add_option("--format", sim.format, "signal format")->check(CLI::IsMember({"embsig", "csv"}))->capture_default_str();
  sim_cmd->add_option("--speakers", sc.num_speakers, "number of speakers")->capture_default_str();
  sim_cmd->add_option("--dim", sc.embedding_dim, "embedding dimension M")->capture_default_str();
  sim_cmd->add_option("--steps", sc.num_steps, "number of time steps T")->capture_default_str();
  sim_cmd->add_option("--step-seconds", sc.step_seconds, "grid step")->capture_default_str();
  sim_cmd->add_option("--window-seconds", sc.window_seconds, "analysis window")->capture_default_str();
  sim_cmd->add_option("--mean-turn-steps", sc.mean_turn_steps, "mean turn length")->capture_default_str();
  sim_cmd->add_option("--overlap-fraction", sc.overlap_fraction, "share of speech steps in overlap")->capture_default_str();
  sim_cmd->add_option("--silence-fraction", sc.silence_fraction, "share of silent steps")->capture_default_str();
  sim_cmd->add_option("--noise-sigma", sc.noise_sigma, "Gaussian noise before renormalization")->capture_default_str();
  sim_cmd->add_option("--mix-weight", sc.mix_weight, "weight of the ongoing speaker in overlaps")->capture_default_str();
  sim_cmd->add_option("--overlap-regions", sc.overlap_regions, "number of overlap regions")->capture_default_str();
  sim_cmd->add_flag("--orthogonalize", sc.orthogonalize, "use orthonormal speaker embeddings");
  sim_cmd->add_option("--seed", sc.seed, "random seed")->capture_default_str();

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Print the chunk grid for a recording length");
  grid_cmd->add_option("--duration", grid.duration, "recording length in seconds")->required();
  grid_cmd->add_option("--window", grid.window, "window length")->capture_default_str();
  grid_cmd->add_option("--max-step", grid.max_step, "largest step")->capture_default_str();
  grid_cmd->add_option("--min-chunks", grid.min_chunks, "chunks wanted")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  apply_thread_cap();
  try {
    if (*est_cmd) return run_estimate(est);
    if (*dia_cmd) return run_diarize(dia);
    if (*ev_cmd) return run_eval(ev);
    if (*sim_cmd) return run_simulate(sim, *sim_cmd);
    if (*grid_cmd) return run_grid(grid);
  } catch (const sd::InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const sd::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const sd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitUsage;
}
