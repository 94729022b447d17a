#include "vqad/io/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <vector>

#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"

namespace vqad::io {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(Config&, std::string_view)> set;  // throws std::invalid_argument
  std::function<std::string(const Config&)> get;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw std::invalid_argument("not a number: '" + std::string(v) + "'");
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

template <typename M>
Field number(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](Config& c, std::string_view v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            member(c) = parse_number<T>(v);
          },
          [member](const Config& c) { return format_number(member(const_cast<Config&>(c))); }};
}

template <typename M>
Field boolean(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key), [member](Config& c, std::string_view v) { member(c) = parse_bool(v); },
          [member](const Config& c) { return std::string(member(const_cast<Config&>(c)) ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(number("data", "image_size", [](Config& c) -> auto& { return c.data.image_size; }));
    f.push_back(number("data", "count", [](Config& c) -> auto& { return c.data.count; }));
    f.push_back(number("data", "val_count", [](Config& c) -> auto& { return c.data.val_count; }));

    f.push_back(number("tokenizer", "codes", [](Config& c) -> auto& { return c.tokenizer.codes; }));
    f.push_back(number("tokenizer", "code_dim", [](Config& c) -> auto& { return c.tokenizer.code_dim; }));
    f.push_back(number("tokenizer", "channels", [](Config& c) -> auto& { return c.tokenizer.channels; }));
    f.push_back(number("tokenizer", "hidden1", [](Config& c) -> auto& { return c.tokenizer.hidden1; }));
    f.push_back(number("tokenizer", "hidden2", [](Config& c) -> auto& { return c.tokenizer.hidden2; }));
    f.push_back(number("tokenizer", "beta", [](Config& c) -> auto& { return c.tokenizer.beta; }));
    f.push_back(number("tokenizer", "lambda_max", [](Config& c) -> auto& { return c.tokenizer.lambda_max; }));
    f.push_back(number("tokenizer", "delta", [](Config& c) -> auto& { return c.tokenizer.delta; }));

    f.push_back(number("tokenizer.train", "steps", [](Config& c) -> auto& { return c.tokenizer_train.steps; }));
    f.push_back(number("tokenizer.train", "batch", [](Config& c) -> auto& { return c.tokenizer_train.batch; }));
    f.push_back(number("tokenizer.train", "learning_rate",
                       [](Config& c) -> auto& { return c.tokenizer_train.adam.learning_rate; }));
    f.push_back(number("tokenizer.train", "log_every", [](Config& c) -> auto& { return c.tokenizer_train.log_every; }));

    f.push_back(number("prior", "layers", [](Config& c) -> auto& { return c.prior.layers; }));
    f.push_back(number("prior", "heads", [](Config& c) -> auto& { return c.prior.heads; }));
    f.push_back(number("prior", "head_dim", [](Config& c) -> auto& { return c.prior.head_dim; }));
    f.push_back(number("prior", "ff", [](Config& c) -> auto& { return c.prior.ff; }));
    f.push_back(boolean("prior", "position_embeddings", [](Config& c) -> auto& { return c.prior.position_embeddings; }));

    f.push_back({"prior.train", "objective",
                 [](Config& c, std::string_view v) { c.prior_train.objective = denoisers::parse_objective(std::string(v)); },
                 [](const Config& c) { return denoisers::objective_name(c.prior_train.objective); }});
    f.push_back({"prior.train", "loss",
                 [](Config& c, std::string_view v) { c.prior_train.loss_mode = diffusion::parse_loss_mode(std::string(v)); },
                 [](const Config& c) { return diffusion::loss_mode_name(c.prior_train.loss_mode); }});
    f.push_back(number("prior.train", "steps", [](Config& c) -> auto& { return c.prior_train.steps; }));
    f.push_back(number("prior.train", "batch", [](Config& c) -> auto& { return c.prior_train.batch; }));
    f.push_back(number("prior.train", "learning_rate", [](Config& c) -> auto& { return c.prior_train.adam.learning_rate; }));
    f.push_back(number("prior.train", "val_every", [](Config& c) -> auto& { return c.prior_train.val_every; }));
    f.push_back(number("prior.train", "val_draws", [](Config& c) -> auto& { return c.prior_train.val_draws; }));
    f.push_back(boolean("prior.train", "val_exact", [](Config& c) -> auto& { return c.prior_train.val_exact; }));

    f.push_back(number("sampling", "steps", [](Config& c) -> auto& { return c.sampling.steps; }));
    f.push_back(number("sampling", "temperature", [](Config& c) -> auto& { return c.sampling.temperature; }));
    f.push_back(number("sampling", "large_temperature", [](Config& c) -> auto& { return c.sampling.large_temperature; }));
    f.push_back(number("sampling", "stride", [](Config& c) -> auto& { return c.sampling.stride; }));
    f.push_back(number("sampling", "window_subset", [](Config& c) -> auto& { return c.sampling.window_subset; }));

    f.push_back(number("metrics", "k", [](Config& c) -> auto& { return c.metrics.k; }));
    f.push_back(number("metrics", "pool", [](Config& c) -> auto& { return c.metrics.pool; }));
    return f;
  }();
  return all;
}

}  // namespace

void Config::finalize() {
  if (data.image_size == 0 || data.image_size % vq::TokenizerConfig::factor) {
    throw UsageError("config: data.image_size must be a positive multiple of " +
                     std::to_string(vq::TokenizerConfig::factor));
  }
  tokenizer.validate();
  prior.codes = tokenizer.codes;
  prior.height = prior.width = data.image_size / vq::TokenizerConfig::factor;
  prior.causal = prior_train.objective == denoisers::PriorObjective::autoregressive;
  prior.validate();
  if (tokenizer_train.batch == 0 || prior_train.batch == 0) throw UsageError("config: batch sizes must be >= 1");
  if (tokenizer_train.log_every == 0) throw UsageError("config: tokenizer.train.log_every must be >= 1");
  if (sampling.temperature < 0 || sampling.large_temperature < 0) throw UsageError("config: temperatures must be >= 0");
  if (metrics.k == 0 || metrics.pool == 0) throw UsageError("config: metrics.k and metrics.pool must be >= 1");
}

Config parse_config(std::string_view text, const std::string& source) {
  Config config;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& f : fields()) known |= f.section == section;
      if (!known) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) fail("key '" + key + "' outside any section");
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) fail("unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(config, value);
    } catch (const std::invalid_argument& e) {
      fail(key + ": " + e.what());
    } catch (const UsageError& e) {
      fail(key + ": " + e.what());
    }
  }
  config.finalize();
  return config;
}

Config load_config(const std::filesystem::path& path) { return parse_config(read_text(path), path.string()); }

std::string to_text(const Config& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::uint64_t config_hash(const Config& config) { return fnv1a(to_text(config)); }

}  // namespace vqad::io
