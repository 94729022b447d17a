// Command line driver for the tokenizer, the token prior and the evaluation
// pipeline. Every subcommand with --seed is bitwise reproducible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vqad/canvas/canvas.hpp"
#include "vqad/denoisers/autoregressive.hpp"
#include "vqad/denoisers/train_prior.hpp"
#include "vqad/diffusion/sampling.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"
#include "vqad/io/checkpoint.hpp"
#include "vqad/io/config.hpp"
#include "vqad/io/feature_io.hpp"
#include "vqad/io/image_io.hpp"
#include "vqad/io/token_io.hpp"
#include "vqad/io/toy_data.hpp"
#include "vqad/metrics/features.hpp"
#include "vqad/metrics/frechet.hpp"
#include "vqad/metrics/prdc.hpp"
#include "vqad/vq/train_tokenizer.hpp"

namespace fs = std::filesystem;
using namespace vqad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

io::Config load_config_or_default(const std::string& path) {
  if (path.empty()) {
    io::Config c;
    c.finalize();
    return c;
  }
  return io::load_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

// Token grids from a VQTK file, or from an image directory through a tokenizer.
std::vector<diffusion::TokenGrid> load_token_data(const std::string& data, const std::string& tokenizer_path) {
  if (fs::is_regular_file(data)) return io::read_tokens(data);
  if (!fs::is_directory(data)) throw UsageError("data " + data + " does not exist");
  if (tokenizer_path.empty()) throw UsageError("an image directory as --data needs --tokenizer");
  const vq::Tokenizer tok = io::load_tokenizer(io::load_checkpoint(tokenizer_path));
  std::vector<diffusion::TokenGrid> out;
  for (const auto& im : io::read_images(data)) out.push_back(tok.tokenize(im));
  return out;
}

metrics::FeatureSet load_features(const std::string& path, std::size_t pool) {
  if (fs::is_directory(path)) {
    const auto images = io::read_images(path);
    return metrics::pooled_features(images, pool);
  }
  if (!fs::exists(path)) throw UsageError(path + " does not exist");
  return io::read_features(path);
}

struct Models {
  io::Config tokenizer_config;
  io::Config prior_config;
  vq::Tokenizer tokenizer;
  denoisers::Transformer prior;
};

Models load_models(const std::string& tokenizer_path, const std::string& prior_path) {
  const io::Checkpoint tck = io::load_checkpoint(tokenizer_path);
  const io::Checkpoint pck = io::load_checkpoint(prior_path);
  io::Config tc = io::checkpoint_config(tck), pc = io::checkpoint_config(pck);
  io::check_compatible(tc, pc);
  return {tc, pc, io::load_tokenizer(tck), io::load_prior(pck)};
}

void write_grid_images(const fs::path& dir, const char* pattern, const vq::Tokenizer& tok,
                       std::span<const diffusion::TokenGrid> grids) {
  for (std::size_t i = 0; i < grids.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, pattern, i);
    io::write_image(dir / name, tok.decode_tokens(grids[i]));
  }
}

// ---- subcommands ----

struct GenDataArgs {
  std::uint64_t seed = 0;
  std::size_t count = 2000;
  std::size_t size = 24;
  std::string out;
};

void run_gen_data(const GenDataArgs& a) {
  io::write_toy_dataset(a.out, a.seed, a.count, a.size);
  std::cout << "wrote " << a.count << " images to " << a.out << "\n";
}

struct TrainArgs {
  std::string config, data, out, tokenizer, loss, objective;
  std::uint64_t seed = 0;
  std::optional<std::size_t> steps;
};

void run_train_tokenizer(const TrainArgs& a) {
  io::Config config = load_config_or_default(a.config);
  if (a.steps) config.tokenizer_train.steps = *a.steps;
  config.tokenizer_train.seed = a.seed;
  config.finalize();
  if (!fs::is_directory(a.data)) throw UsageError("data directory " + a.data + " does not exist");
  auto images = io::read_images(a.data);
  for (const auto& im : images) {
    if (im.height != config.data.image_size || im.width != config.data.image_size) {
      throw UsageError("training images must be " + std::to_string(config.data.image_size) + " pixels square");
    }
  }
  const io::Split split = io::split_train_val(std::move(images), config.data.val_count);

  vq::Tokenizer tok(config.tokenizer, a.seed);
  std::ostringstream log;
  log << "step,loss_rec,loss_codebook,loss_commit,lambda,codes_used\n";
  const auto start = Clock::now();
  auto result = vq::train_tokenizer(split.train, tok, config.tokenizer_train, [&](const vq::TokenizerLogRow& r) {
    log << r.step << "," << format_double(r.loss_rec) << "," << format_double(r.loss_codebook) << ","
        << format_double(r.loss_commit) << "," << format_double(r.lambda) << "," << r.codes_used << "\n";
  });
  const double elapsed = seconds_since(start);
  io::save_checkpoint(a.out, io::tokenizer_checkpoint(tok, config, a.seed, &result.adam));
  io::write_text(with_suffix(a.out, ".csv"), log.str());

  const std::span<const vq::Image> val = split.val.empty() ? std::span<const vq::Image>(split.train) : split.val;
  const double rec = vq::reconstruction_mse(val, tok);
  const double baseline = vq::mean_baseline_mse(val);
  std::cout << "val_rec_mse " << format_double(rec) << "\nbaseline_mse " << format_double(baseline)
            << "\ntrain_seconds " << format_double(elapsed) << "\n";
}

void run_encode(const TrainArgs& a) {
  const auto grids = load_token_data(a.data, a.tokenizer);
  io::write_tokens(a.out, grids);
  std::cout << "wrote " << grids.size() << " token grids to " << a.out << "\n";
}

void run_train_prior(const TrainArgs& a) {
  io::Config config = load_config_or_default(a.config);
  if (a.steps) config.prior_train.steps = *a.steps;
  if (!a.loss.empty()) config.prior_train.loss_mode = diffusion::parse_loss_mode(a.loss);
  if (!a.objective.empty()) config.prior_train.objective = denoisers::parse_objective(a.objective);
  config.prior_train.seed = a.seed;
  config.finalize();

  const auto grids = load_token_data(a.data, a.tokenizer);
  for (const auto& g : grids) {
    if (g.height != config.prior.height || g.width != config.prior.width || g.codes != config.prior.codes) {
      throw UsageError("token grids are " + std::to_string(g.height) + "x" + std::to_string(g.width) + " with K = " +
                       std::to_string(g.codes) + ", the config expects " + std::to_string(config.prior.height) + "x" +
                       std::to_string(config.prior.width) + " with K = " + std::to_string(config.prior.codes));
    }
  }
  const std::size_t val_count = std::min(config.data.val_count, grids.size());
  if (val_count == 0 || val_count >= grids.size()) {
    throw UsageError("need more token grids than the " + std::to_string(config.data.val_count) +
                     " held out for validation, got " + std::to_string(grids.size()));
  }
  const std::span<const diffusion::TokenGrid> all(grids);
  const auto train = all.first(grids.size() - val_count), val = all.last(val_count);

  denoisers::Transformer prior(config.prior, a.seed);
  std::ostringstream log;
  log << "step,loss,val_elbo_bpd\n";
  const auto start = Clock::now();
  auto result = denoisers::train_prior(train, val, prior, config.prior_train, [&](const denoisers::PriorLogRow& r) {
    log << r.step << "," << format_double(r.loss) << "," << format_double(r.val_bpd) << "\n";
  });
  const double elapsed = seconds_since(start);
  io::save_checkpoint(a.out, io::prior_checkpoint(prior, config, a.seed, &result.adam));
  io::write_text(with_suffix(a.out, ".csv"), log.str());
  std::cout << "final_val_bpd " << format_double(result.final_val_bpd) << "\ntrain_seconds " << format_double(elapsed)
            << "\n";
}

struct SampleArgs {
  std::string tokenizer, prior, out;
  std::uint64_t seed = 0;
  std::size_t n = 16;
  std::size_t steps = 0;
  std::optional<double> temperature;
  std::vector<std::size_t> extents;
  std::optional<std::size_t> stride;
  std::optional<std::size_t> window_subset;
};

void run_sample(const SampleArgs& a) {
  if (a.n == 0) return;
  const Models m = load_models(a.tokenizer, a.prior);
  const double temperature = a.temperature.value_or(m.prior_config.sampling.temperature);
  const std::size_t L = m.prior.height() * m.prior.width();
  const std::size_t steps = a.steps ? a.steps : (m.prior_config.sampling.steps ? m.prior_config.sampling.steps : L);
  const bool causal = m.prior.config().causal;
  const auto budget = diffusion::make_step_budget(L, steps);

  ensure_dir(a.out);
  std::vector<diffusion::TokenGrid> grids;
  std::ostringstream log;
  log << "index,seconds,denoiser_calls,steps\n";
  for (std::size_t i = 0; i < a.n; ++i) {
    diffusion::Rng rng(a.seed, i);
    diffusion::SampleStats stats;
    const auto start = Clock::now();
    grids.push_back(causal ? denoisers::ar_sample(m.prior, temperature, rng, &stats)
                           : diffusion::sample(m.prior, budget, temperature, rng, &stats));
    log << i << "," << format_double(seconds_since(start)) << "," << stats.denoiser_calls << "," << stats.steps << "\n";
  }
  write_grid_images(a.out, "sample_%05zu.ppm", m.tokenizer, grids);
  io::write_tokens(fs::path(a.out) / "tokens.vqtk", grids);
  io::write_text(fs::path(a.out) / "samples.csv", log.str());
}

void run_sample_large(const SampleArgs& a) {
  if (a.n == 0) return;
  const Models m = load_models(a.tokenizer, a.prior);
  if (m.prior.config().causal) throw UsageError("sample-large needs an absorbing-diffusion prior");
  const auto& s = m.prior_config.sampling;
  canvas::LargeCanvasOptions options;
  options.temperature = a.temperature.value_or(s.large_temperature);
  options.stride = a.stride.value_or(s.stride);
  options.window_subset = a.window_subset.value_or(s.window_subset);
  const std::size_t h = a.extents.at(0), w = a.extents.at(1);
  const std::size_t T = h * w;
  const auto budget = diffusion::make_step_budget(T, a.steps ? a.steps : T);

  ensure_dir(a.out);
  std::vector<diffusion::TokenGrid> grids;
  std::ostringstream log;
  log << "index,seconds,denoiser_calls,steps\n";
  for (std::size_t i = 0; i < a.n; ++i) {
    diffusion::Rng rng(a.seed, i);
    diffusion::SampleStats stats;
    const auto start = Clock::now();
    grids.push_back(canvas::sample_large(h, w, m.prior, budget, options, rng, &stats));
    log << i << "," << format_double(seconds_since(start)) << "," << stats.denoiser_calls << "," << stats.steps << "\n";
  }
  write_grid_images(a.out, "large_%05zu.ppm", m.tokenizer, grids);
  io::write_tokens(fs::path(a.out) / "tokens.vqtk", grids);
  io::write_text(fs::path(a.out) / "samples.csv", log.str());
}

struct InpaintArgs {
  std::string tokenizer, prior, image, mask, out;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::optional<double> temperature;
  std::optional<std::size_t> stride;
};

void run_inpaint(const InpaintArgs& a) {
  const Models m = load_models(a.tokenizer, a.prior);
  if (m.prior.config().causal) throw UsageError("inpaint needs an absorbing-diffusion prior");
  const vq::Image image = io::read_image(a.image);
  const auto z0 = m.tokenizer.tokenize(image);
  const auto region = io::read_region_mask(a.mask, z0.height, z0.width, vq::TokenizerConfig::factor);
  canvas::InpaintOptions options;
  options.temperature = a.temperature.value_or(m.prior_config.sampling.temperature);
  options.steps = a.steps;
  options.stride = a.stride.value_or(m.prior_config.sampling.stride);
  diffusion::Rng rng(a.seed);
  diffusion::SampleStats stats;
  const auto out = canvas::inpaint(z0, region, m.prior, options, rng, &stats);
  const fs::path path(a.out);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  io::write_image(path, m.tokenizer.decode_tokens(out));
  const std::vector<diffusion::TokenGrid> both{z0, out};
  io::write_tokens(with_suffix(path, ".vqtk"), both);
  std::cout << "masked " << region.count() << "\nsteps " << stats.steps << "\ndenoiser_calls " << stats.denoiser_calls
            << "\n";
}

struct FeatureArgs {
  std::string images, out;
  std::size_t pool = 8;
};

void run_features(const FeatureArgs& a) {
  if (!fs::is_directory(a.images)) throw UsageError("image directory " + a.images + " does not exist");
  const auto images = io::read_images(a.images);
  io::write_features(a.out, metrics::pooled_features(images, a.pool));
}

struct EvaluateArgs {
  std::string real, fake, out;
  std::size_t k = 5;
  std::size_t pool = 8;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto real = load_features(a.real, a.pool);
  const auto fake = load_features(a.fake, a.pool);
  const metrics::Prdc p = metrics::prdc(real, fake, a.k);
  const double fd = metrics::frechet_distance(metrics::fit_gaussian(real), metrics::fit_gaussian(fake));
  std::ostringstream report;
  report << "precision = " << format_double(p.precision) << "\n"
         << "recall = " << format_double(p.recall) << "\n"
         << "density = " << format_double(p.density) << "\n"
         << "coverage = " << format_double(p.coverage) << "\n"
         << "frechet = " << format_double(fd) << "\n"
         << "n_real = " << real.n << "\n"
         << "n_fake = " << fake.n << "\n"
         << "k = " << a.k << "\n";
  std::cout << report.str();
  if (!a.out.empty()) io::write_text(a.out, report.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector-quantized absorbing diffusion: tokenizer, prior, sampling and evaluation"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 numeric fault, 2 usage error, 3 I/O error, 4 malformed or incompatible file.");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a procedurally generated toy image dataset");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--count", gen.count, "Number of images")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image side in pixels")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->footer(
      "Writes img_NNNNN.ppm and manifest.csv with columns filename,index,background,shapes; shapes are "
      "';'-separated rect:r0:c0:r1:c1:color or circle:row:col:radius:color entries (palette indices).");

  TrainArgs tt;
  auto* tt_cmd = app.add_subcommand("train-tokenizer", "Train the VQ image tokenizer");
  tt_cmd->add_option("--config", tt.config, "Config file (defaults when omitted)");
  tt_cmd->add_option("--data", tt.data, "Image directory")->required();
  tt_cmd->add_option("--out", tt.out, "Checkpoint path")->required();
  tt_cmd->add_option("--seed", tt.seed, "Initialization and batching seed");
  tt_cmd->add_option("--steps", tt.steps, "Override tokenizer.train.steps");
  tt_cmd->footer(
      "Writes the checkpoint and <out>.csv with columns step,loss_rec,loss_codebook,loss_commit,lambda,codes_used. "
      "Prints val_rec_mse, baseline_mse (per-pixel dataset mean) and train_seconds.");

  TrainArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Tokenize an image directory into a VQTK file");
  enc_cmd->add_option("--tokenizer", enc.tokenizer, "Tokenizer checkpoint")->required();
  enc_cmd->add_option("--data", enc.data, "Image directory")->required();
  enc_cmd->add_option("--out", enc.out, "Token file")->required();

  TrainArgs tp;
  auto* tp_cmd = app.add_subcommand("train-prior", "Train the token prior");
  tp_cmd->add_option("--config", tp.config, "Config file (defaults when omitted)");
  tp_cmd->add_option("--data", tp.data, "VQTK token file, or an image directory with --tokenizer")->required();
  tp_cmd->add_option("--tokenizer", tp.tokenizer, "Tokenizer checkpoint for image directories");
  tp_cmd->add_option("--out", tp.out, "Checkpoint path")->required();
  tp_cmd->add_option("--seed", tp.seed, "Initialization and batching seed");
  tp_cmd->add_option("--steps", tp.steps, "Override prior.train.steps");
  tp_cmd->add_option("--loss", tp.loss, "Override prior.train.loss: elbo or reweighted");
  tp_cmd->add_option("--objective", tp.objective, "Override prior.train.objective: absorbing or autoregressive");
  tp_cmd->footer(
      "The last data.val_count grids are held out. Writes the checkpoint and <out>.csv with columns "
      "step,loss,val_elbo_bpd (empty on rows without validation). Prints final_val_bpd and train_seconds.");

  SampleArgs sa;
  auto* sa_cmd = app.add_subcommand("sample", "Draw unconditional samples");
  sa_cmd->add_option("--tokenizer", sa.tokenizer, "Tokenizer checkpoint")->required();
  sa_cmd->add_option("--prior", sa.prior, "Prior checkpoint")->required();
  sa_cmd->add_option("--n", sa.n, "Number of samples")->capture_default_str();
  sa_cmd->add_option("--steps", sa.steps, "Denoiser calls per sample (default: one per latent position)");
  sa_cmd->add_option("--temperature", sa.temperature, "Softmax temperature (default sampling.temperature, 0.9)");
  sa_cmd->add_option("--out", sa.out, "Output directory")->required();
  sa_cmd->add_option("--seed", sa.seed, "Sampling seed; sample i uses stream i");
  sa_cmd->footer(
      "Writes sample_NNNNN.ppm, tokens.vqtk and samples.csv with columns index,seconds,denoiser_calls,steps. "
      "Autoregressive priors always take one call per position. --n 0 writes nothing.");

  SampleArgs sl;
  auto* sl_cmd = app.add_subcommand("sample-large", "Sample a canvas larger than the prior's window");
  sl_cmd->add_option("--tokenizer", sl.tokenizer, "Tokenizer checkpoint")->required();
  sl_cmd->add_option("--prior", sl.prior, "Prior checkpoint")->required();
  sl_cmd->add_option("--extents", sl.extents, "Canvas height and width in tokens")->expected(2)->required();
  sl_cmd->add_option("--stride", sl.stride, "Window stride (default sampling.stride)");
  sl_cmd->add_option("--window-subset", sl.window_subset, "Random windows per step, 0 for all (default sampling.window_subset)");
  sl_cmd->add_option("--temperature", sl.temperature, "Softmax temperature (default sampling.large_temperature, 0.8)");
  sl_cmd->add_option("--steps", sl.steps, "Reverse steps (default: one per canvas position)");
  sl_cmd->add_option("--n", sl.n, "Number of canvases")->capture_default_str();
  sl_cmd->add_option("--out", sl.out, "Output directory")->required();
  sl_cmd->add_option("--seed", sl.seed, "Sampling seed; canvas i uses stream i");
  sl.n = 1;
  sl_cmd->footer("Writes large_NNNNN.ppm, tokens.vqtk and samples.csv as for sample.");

  InpaintArgs ip;
  auto* ip_cmd = app.add_subcommand("inpaint", "Regenerate a masked region of an image");
  ip_cmd->add_option("--tokenizer", ip.tokenizer, "Tokenizer checkpoint")->required();
  ip_cmd->add_option("--prior", ip.prior, "Prior checkpoint")->required();
  ip_cmd->add_option("--image", ip.image, "Input PPM")->required();
  ip_cmd->add_option("--mask", ip.mask, "PGM region mask at token or image resolution, nonzero = regenerate")->required();
  ip_cmd->add_option("--out", ip.out, "Output PPM")->required();
  ip_cmd->add_option("--steps", ip.steps, "Reverse steps (default: one per masked position)");
  ip_cmd->add_option("--temperature", ip.temperature, "Softmax temperature (default sampling.temperature)");
  ip_cmd->add_option("--stride", ip.stride, "Window stride for images larger than the prior's window");
  ip_cmd->add_option("--seed", ip.seed, "Sampling seed");
  ip_cmd->footer("Writes the image and <out>.vqtk holding the input and output token grids.");

  FeatureArgs fa;
  auto* fa_cmd = app.add_subcommand("features", "Write pooled-pixel features of an image directory");
  fa_cmd->add_option("--images", fa.images, "Image directory")->required();
  fa_cmd->add_option("--out", fa.out, "VQFT feature file")->required();
  fa_cmd->add_option("--pool", fa.pool, "Pooling grid side")->capture_default_str();

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "PRDC and Frechet distance between two sets");
  ev_cmd->add_option("--real", ev.real, "Image directory or VQFT file")->required();
  ev_cmd->add_option("--fake", ev.fake, "Image directory or VQFT file")->required();
  ev_cmd->add_option("--k", ev.k, "Nearest-neighbour k")->capture_default_str();
  ev_cmd->add_option("--pool", ev.pool, "Pooling grid side for image directories")->capture_default_str();
  ev_cmd->add_option("--out", ev.out, "Report file (also printed)");
  ev_cmd->footer(
      "Report lines 'key = value' for precision, recall, density, coverage, frechet, n_real, n_fake, k. "
      "Density is not clamped.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*gen_cmd) run_gen_data(gen);
    if (*tt_cmd) run_train_tokenizer(tt);
    if (*enc_cmd) run_encode(enc);
    if (*tp_cmd) run_train_prior(tp);
    if (*sa_cmd) run_sample(sa);
    if (*sl_cmd) run_sample_large(sl);
    if (*ip_cmd) run_inpaint(ip);
    if (*fa_cmd) run_features(fa);
    if (*ev_cmd) run_evaluate(ev);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::numeric);
  }
  return 0;
}
