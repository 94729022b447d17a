#include "vqad/io/checkpoint.hpp"

#include <bit>

#include "vqad/error.hpp"
#include "vqad/io/binary.hpp"

namespace vqad::io {

namespace {

constexpr std::string_view kMagic = "VQAD";

template <typename Params>
void add_params(Checkpoint& ck, const std::string& prefix, const Params& params) {
  for (const auto* p : params) ck.add(prefix + p->name, p->value);
}

void add_adam(Checkpoint& ck, const ad::AdamState& adam, std::span<const ad::Parameter* const> params) {
  if (adam.first_moment.size() != params.size()) throw UsageError("checkpoint: Adam state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.add("adam.m." + params[i]->name, adam.first_moment[i]);
    ck.add("adam.v." + params[i]->name, adam.second_moment[i]);
  }
  // the step counter travels as the raw bits of two floats
  ad::Tensor step({2});
  step[0] = std::bit_cast<float>(static_cast<std::uint32_t>(adam.step));
  step[1] = std::bit_cast<float>(static_cast<std::uint32_t>(adam.step >> 32));
  ck.add("adam.step", step);
}

template <typename Params>
void restore(const Checkpoint& ck, const std::string& prefix, const Params& params) {
  for (auto* p : params) {
    const ad::Tensor& t = ck.get(prefix + p->name);
    if (t.shape() != p->value.shape()) {
      throw FormatError("checkpoint: section " + prefix + p->name + " has shape " + ad::shape_string(t.shape()) +
                        ", model expects " + ad::shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

Checkpoint base(const Config& config, std::uint64_t seed) {
  Checkpoint ck;
  ck.config_text = to_text(config);
  ck.config_hash = config_hash(config);
  ck.seed = seed;
  return ck;
}

}  // namespace

void Checkpoint::add(std::string name, ad::Tensor value) {
  if (has(name)) throw UsageError("checkpoint: duplicate section " + name);
  sections.emplace_back(std::move(name), std::move(value));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : sections) {
    if (n == name) return true;
  }
  return false;
}

const ad::Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : sections) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint: missing section " + name);
}

std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
  Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u64(ck.config_hash);
  w.u64(ck.seed);
  w.u32(static_cast<std::uint32_t>(ck.sections.size()));
  for (const auto& [name, t] : ck.sections) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u64(4 + 8 * t.rank() + 4 * t.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) w.u64(extent);
    for (float v : t.data()) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(ck.config_text.size()));
  w.bytes(ck.config_text);
  return w.data();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes, const std::string& what) {
  Reader r(bytes, what);
  if (r.remaining() < 4 || r.bytes(4) != kMagic) throw FormatError(what + ": not a VQAD checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": format version " + std::to_string(version) + ", this build reads " +
                      std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.config_hash = r.u64();
  ck.seed = r.u64();
  const std::uint32_t n = r.u32();
  for (std::uint32_t s = 0; s < n; ++s) {
    std::string name = r.bytes(r.u32());
    const std::uint64_t payload = r.u64();
    r.need(payload);
    const std::size_t before = r.remaining();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError(what + ": section " + name + " has implausible rank " + std::to_string(rank));
    ad::Shape shape(rank);
    for (auto& e : shape) e = r.u64();
    const std::size_t count = ad::shape_size(shape);
    if (payload != 4 + 8 * std::uint64_t{rank} + 4 * std::uint64_t{count}) {
      throw FormatError(what + ": section " + name + " payload length disagrees with its shape");
    }
    std::vector<float> values(count);
    for (auto& v : values) v = r.f32();
    if (before - r.remaining() != payload) throw FormatError(what + ": section " + name + " is malformed");
    ck.sections.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  ck.config_text = r.bytes(r.u32());
  if (!r.done()) throw FormatError(what + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) { write_file(path, serialize(ck)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path), path.string()); }

Checkpoint tokenizer_checkpoint(const vq::Tokenizer& tokenizer, const Config& config, std::uint64_t seed,
                                const ad::AdamState* adam) {
  Checkpoint ck = base(config, seed);
  const auto params = tokenizer.parameters();
  add_params(ck, "tokenizer/", params);
  if (adam) add_adam(ck, *adam, params);
  return ck;
}

Checkpoint prior_checkpoint(const denoisers::Transformer& prior, const Config& config, std::uint64_t seed,
                            const ad::AdamState* adam) {
  Checkpoint ck = base(config, seed);
  const auto params = prior.parameters();
  add_params(ck, "prior/", params);
  if (adam) add_adam(ck, *adam, params);
  return ck;
}

Config checkpoint_config(const Checkpoint& ck) {
  try {
    return parse_config(ck.config_text, "checkpoint config");
  } catch (const UsageError& e) {
    throw FormatError(e.what());
  }
}

vq::Tokenizer load_tokenizer(const Checkpoint& ck) {
  if (!ck.has("tokenizer/codebook")) throw UsageError("checkpoint does not hold a tokenizer");
  const Config config = checkpoint_config(ck);
  vq::Tokenizer tokenizer(config.tokenizer, 0);
  restore(ck, "tokenizer/", tokenizer.parameters());
  tokenizer.codebook().validate();
  tokenizer.codebook().reset_usage();
  return tokenizer;
}

denoisers::Transformer load_prior(const Checkpoint& ck) {
  if (!ck.has("prior/tok_emb")) throw UsageError("checkpoint does not hold a prior");
  const Config config = checkpoint_config(ck);
  denoisers::Transformer prior(config.prior, 0);
  restore(ck, "prior/", prior.parameters());
  return prior;
}

ad::AdamState load_adam(const Checkpoint& ck, std::span<ad::Parameter* const> params, ad::AdamConfig config) {
  ad::AdamState state = ad::AdamState::for_parameters(params, config);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first_moment[i] = ck.get("adam.m." + params[i]->name);
    state.second_moment[i] = ck.get("adam.v." + params[i]->name);
  }
  const ad::Tensor& step = ck.get("adam.step");
  if (step.size() != 2) throw FormatError("checkpoint: malformed adam.step");
  state.step = std::uint64_t{std::bit_cast<std::uint32_t>(step[0])} |
               (std::uint64_t{std::bit_cast<std::uint32_t>(step[1])} << 32);
  return state;
}

void check_compatible(const Config& tokenizer, const Config& prior) {
  if (tokenizer.tokenizer.codes != prior.prior.codes || tokenizer.data.image_size != prior.data.image_size) {
    throw UsageError("tokenizer (K=" + std::to_string(tokenizer.tokenizer.codes) + ", image " +
                     std::to_string(tokenizer.data.image_size) + ") and prior (K=" + std::to_string(prior.prior.codes) +
                     ", image " + std::to_string(prior.data.image_size) + ") checkpoints are incompatible");
  }
}

}  // namespace vqad::io
