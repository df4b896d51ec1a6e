#include "fern/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fern::model {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("model: " + what);
}

thread_local std::uint64_t g_reflection_madds = 0;

double softclamp_inverse(double y, double lo, double hi) {
  const double m = 0.5 * (lo + hi);
  const double w = 0.5 * (hi - lo);
  return m + w * std::atanh((y - m) / w);
}

num::Tensor normal_tensor(std::vector<std::size_t> shape, rng::Stream& s,
                          double std_dev) {
  num::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std_dev * s.normal();
  return t;
}

// Allocates the full parameter structure with zeroed tensors; init and
// checkpoint loading both start from this shape skeleton.
FernParameters make_skeleton(const FernConfig& c) {
  const std::size_t l = c.context_len;
  const std::size_t dz = c.latent_dim();
  const std::size_t dh = c.hidden;
  const std::size_t p = c.patch_size();
  const std::size_t np = c.patch_count();
  const std::size_t r = c.reflection_count();

  FernParameters params;
  params.feature_x = {{num::Tensor({l, dh}), num::Tensor({dh})},
                      {num::Tensor({dh, dh}), num::Tensor({dh})}};
  params.feature_z = {{num::Tensor({dz, dh}), num::Tensor({dh})},
                      {num::Tensor({dh, dh}), num::Tensor({dh})}};
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    params.head_x.push_back(
        {num::Tensor({dh, 2 * dz}), num::Tensor({2 * dz})});
    params.head_z.push_back({num::Tensor({dh, 2 * l}), num::Tensor({2 * l})});
  }
  for (std::size_t j = 0; j < np; ++j) {
    params.patch_embed.push_back(num::Tensor({std::size_t{1}, dh}));
  }
  params.ot_head = {{num::Tensor({dh, dh}), num::Tensor({dh})},
                    {num::Tensor({dh, (2 + r) * p}),
                     num::Tensor({(2 + r) * p})}};
  for (std::size_t k = 0; k < c.decoder_count(); ++k) {
    params.decoder.push_back({num::Tensor({p, p}), num::Tensor({dh, p}),
                              num::Tensor({p}), num::Tensor({p, p}),
                              num::Tensor({p})});
  }
  return params;
}

}  // namespace

void FernConfig::validate() const {
  if (context_len == 0 || horizon == 0 || hidden == 0) {
    fail("context, horizon, and hidden width must be positive");
  }
  if (latent_dim() == 0) fail("latent dimension must be positive");
  if (encoder_layers == 0) fail("encoder needs at least one layer");
  if (!no_patch) {
    if (patch == 0 || horizon % patch != 0) {
      fail("patch size must divide the horizon");
    }
  }
  const std::size_t r = reflection_count();
  if (r > patch_size()) {
    fail("reflection count cannot exceed the patch size");
  }
  if (r % 2 != 0) {
    fail("reflection count must be even to pin the determinant at +1");
  }
  if (!(noise_scale > 0.0)) fail("noise scale must be positive");
  if (!(scale_lo < scale_hi) || !(block_lo < block_hi) ||
      !(shift_lo < shift_hi)) {
    fail("soft bounds must be ordered");
  }
  std::set<std::size_t> seen;
  for (std::size_t b : block_layers) {
    if (b < 1 || b > encoder_layers) {
      fail("block layer index out of range");
    }
    if (!seen.insert(b).second) fail("duplicate block layer index");
  }
  if (only_encoder && no_encoder_no_mu) {
    fail("only_encoder and no_encoder_no_mu are mutually exclusive");
  }
}

std::string FernConfig::to_json() const {
  nlohmann::json j;
  j["context_len"] = context_len;
  j["horizon"] = horizon;
  j["patch"] = patch;
  j["reflections"] = reflections;
  j["encoder_layers"] = encoder_layers;
  j["decoder_steps"] = decoder_steps;
  j["hidden"] = hidden;
  j["latent"] = latent;
  j["noise_scale"] = noise_scale;
  j["scale_lo"] = scale_lo;
  j["scale_hi"] = scale_hi;
  j["block_lo"] = block_lo;
  j["block_hi"] = block_hi;
  j["shift_lo"] = shift_lo;
  j["shift_hi"] = shift_hi;
  j["block_layers"] = block_layers;
  j["no_rotation"] = no_rotation;
  j["no_patch"] = no_patch;
  j["only_encoder"] = only_encoder;
  j["no_encoder_no_mu"] = no_encoder_no_mu;
  return j.dump(2);
}

FernConfig FernConfig::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  FernConfig c;
  c.context_len = j.at("context_len").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.patch = j.at("patch").get<std::size_t>();
  c.reflections = j.at("reflections").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_steps = j.at("decoder_steps").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.noise_scale = j.at("noise_scale").get<double>();
  c.scale_lo = j.at("scale_lo").get<double>();
  c.scale_hi = j.at("scale_hi").get<double>();
  c.block_lo = j.at("block_lo").get<double>();
  c.block_hi = j.at("block_hi").get<double>();
  c.shift_lo = j.at("shift_lo").get<double>();
  c.shift_hi = j.at("shift_hi").get<double>();
  c.block_layers = j.at("block_layers").get<std::vector<std::size_t>>();
  c.no_rotation = j.at("no_rotation").get<bool>();
  c.no_patch = j.at("no_patch").get<bool>();
  c.only_encoder = j.at("only_encoder").get<bool>();
  c.no_encoder_no_mu = j.at("no_encoder_no_mu").get<bool>();
  return c;
}

FernParameters init_parameters(const FernConfig& config, rng::Stream init) {
  config.validate();
  const std::size_t l = config.context_len;
  const std::size_t dz = config.latent_dim();
  const std::size_t dh = config.hidden;
  const std::size_t p = config.patch_size();
  const std::size_t r = config.reflection_count();

  const double scale_one =
      softclamp_inverse(1.0, config.scale_lo, config.scale_hi);
  const double block_one =
      softclamp_inverse(1.0, config.block_lo, config.block_hi);

  FernParameters params = make_skeleton(config);

  auto feature_init = [&init](Mlp2& m, std::size_t fan_in, std::size_t dh_) {
    m.l1.w = normal_tensor({fan_in, dh_}, init, 1.0 / std::sqrt(double(fan_in)));
    m.l2.w = normal_tensor({dh_, dh_}, init, 1.0 / std::sqrt(double(dh_)));
  };
  feature_init(params.feature_x, l, dh);
  feature_init(params.feature_z, dz, dh);

  const std::set<std::size_t> block(config.block_layers.begin(),
                                    config.block_layers.end());
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    params.head_x[i].w = normal_tensor({dh, 2 * dz}, init, 0.01);
    for (std::size_t k = 0; k < dz; ++k) {
      params.head_x[i].b[k] = scale_one;
    }
    params.head_z[i].w = normal_tensor({dh, 2 * l}, init, 0.01);
    if (block.count(i + 1)) {
      // Pairwise complex scaling: identity is (1, 0) per pair, and an odd
      // trailing coordinate is scaled plainly.
      for (std::size_t k = 0; k < l; k += 2) {
        params.head_z[i].b[k] = block_one;
      }
      if (l % 2 == 1) params.head_z[i].b[l - 1] = block_one;
    } else {
      for (std::size_t k = 0; k < l; ++k) {
        params.head_z[i].b[k] = scale_one;
      }
    }
  }

  for (num::Tensor& e : params.patch_embed) {
    e = normal_tensor({std::size_t{1}, dh}, init, 0.01);
  }

  params.ot_head.l1.w = normal_tensor({dh, dh}, init,
                                      1.0 / std::sqrt(double(dh)));
  params.ot_head.l2.w = normal_tensor({dh, (2 + r) * p}, init, 0.01);
  for (std::size_t k = 0; k < p; ++k) {
    params.ot_head.l2.b[k] = scale_one;
  }

  for (DecoderStep& d : params.decoder) {
    d.w_t = normal_tensor({p, p}, init, 1.0 / std::sqrt(double(p)));
    d.w_u = normal_tensor({dh, p}, init, 1.0 / std::sqrt(double(dh)));
    // w_out stays zero so the refinement starts as the identity.
  }
  return params;
}

std::size_t count_parameters(const FernParameters& params) {
  std::size_t n = 0;
  params.for_each(
      [&n](const std::string&, const num::Tensor& t) { n += t.size(); });
  return n;
}

BoundParameters bind_parameters(num::Tape& tape,
                                const FernParameters& params) {
  BoundParameters b;
  auto push = [&tape, &b](const num::Tensor& t) {
    const num::Tape::Id id = tape.leaf(t);
    b.all.push_back(id);
    return id;
  };
  auto mlp = [&push](const Mlp2& m) {
    BoundParameters::M out;
    out.l1 = {push(m.l1.w), push(m.l1.b)};
    out.l2 = {push(m.l2.w), push(m.l2.b)};
    return out;
  };
  b.feature_x = mlp(params.feature_x);
  b.feature_z = mlp(params.feature_z);
  for (const Linear& h : params.head_x) {
    b.head_x.push_back({push(h.w), push(h.b)});
  }
  for (const Linear& h : params.head_z) {
    b.head_z.push_back({push(h.w), push(h.b)});
  }
  for (const num::Tensor& e : params.patch_embed) {
    b.patch_embed.push_back(push(e));
  }
  b.ot_head = mlp(params.ot_head);
  for (const DecoderStep& d : params.decoder) {
    b.decoder.push_back({push(d.w_t), push(d.w_u), push(d.b_in),
                         push(d.w_out), push(d.b_out)});
  }
  return b;
}

namespace {

using Id = num::Tape::Id;

Id linear(num::Tape& tape, const BoundParameters::L& l, Id a) {
  return tape.add(tape.matmul(a, l.w), l.b);
}

Id feature_mlp(num::Tape& tape, const BoundParameters::M& m, Id a) {
  return tape.tanh(linear(tape, m.l2, tape.tanh(linear(tape, m.l1, a))));
}

// One Householder reflection w - 2 (w . v) v per row, and the bookkeeping
// for the cost assertion.
Id reflect(num::Tape& tape, Id w, Id v, std::size_t batch, std::size_t p) {
  const Id dot = tape.row_sum(tape.mul(w, v));
  g_reflection_madds += batch * (2 * p + 1);
  return tape.sub(w, tape.row_scale(tape.scale(dot, 2.0), v));
}

}  // namespace

ForwardResult forward(num::Tape& tape, const BoundParameters& bound,
                      const FernConfig& config, const num::Tensor& x,
                      const num::Tensor& z0, const num::Tensor& y0,
                      bool want_factors) {
  config.validate();
  const std::size_t l = config.context_len;
  const std::size_t dz = config.latent_dim();
  const std::size_t n = config.horizon;
  const std::size_t p = config.patch_size();
  const std::size_t np = config.patch_count();
  const std::size_t r = config.reflection_count();

  if (x.rank() != 2 || x.cols() != l) fail("context must be [batch, L]");
  const std::size_t batch = x.rows();
  if (z0.rank() != 2 || z0.rows() != batch || z0.cols() != dz) {
    fail("z noise must be [batch, latent]");
  }
  if (y0.rank() != 2 || y0.rows() != batch || y0.cols() != n) {
    fail("y noise must be [batch, horizon]");
  }
  if (bound.head_x.size() != config.encoder_layers ||
      bound.patch_embed.size() != np ||
      bound.decoder.size() != config.decoder_count()) {
    fail("bound parameters do not match the configuration");
  }

  ForwardResult result;

  Id xc = tape.input(x);
  Id zc = tape.input(z0);
  const Id y0_id = tape.input(y0);

  Id h_z = -1;
  if (config.no_encoder_no_mu) {
    h_z = feature_mlp(tape, bound.feature_z, zc);
  } else {
    const std::set<std::size_t> block(config.block_layers.begin(),
                                      config.block_layers.end());
    for (std::size_t i = 0; i < config.encoder_layers; ++i) {
      const Id h_x = feature_mlp(tape, bound.feature_x, xc);
      const Id raw_z = linear(tape, bound.head_x[i], h_x);
      const Id s_z = tape.softclamp(tape.slice_cols(raw_z, 0, dz),
                                    config.scale_lo, config.scale_hi);
      const Id t_z = tape.slice_cols(raw_z, dz, dz);
      zc = tape.add(tape.mul(s_z, zc), t_z);

      h_z = feature_mlp(tape, bound.feature_z, zc);
      const Id raw_x = linear(tape, bound.head_z[i], h_z);
      const Id t_x = tape.slice_cols(raw_x, l, l);
      if (block.count(i + 1)) {
        const Id s_x = tape.softclamp(tape.slice_cols(raw_x, 0, l),
                                      config.block_lo, config.block_hi);
        xc = tape.add(tape.pair_mul(s_x, xc), t_x);
      } else {
        const Id s_x = tape.softclamp(tape.slice_cols(raw_x, 0, l),
                                      config.scale_lo, config.scale_hi);
        xc = tape.add(tape.mul(s_x, xc), t_x);
      }
    }
  }

  std::vector<Id> patches;
  patches.reserve(np);
  for (std::size_t j = 0; j < np; ++j) {
    const Id mixed = tape.add(h_z, bound.patch_embed[j]);
    const Id u = tape.tanh(linear(tape, bound.ot_head.l1, mixed));
    const Id raw = linear(tape, bound.ot_head.l2, u);

    const Id lam = tape.softclamp(tape.slice_cols(raw, 0, p),
                                  config.scale_lo, config.scale_hi);

    Id shift = -1;
    if (!config.no_encoder_no_mu) {
      shift = tape.softclamp(tape.slice_cols(raw, p, p), config.shift_lo,
                             config.shift_hi);
      for (const BoundParameters::D& d : bound.decoder) {
        Id pre = tape.add(tape.matmul(shift, d.w_t), tape.matmul(u, d.w_u));
        pre = tape.add(pre, d.b_in);
        shift = tape.add(shift, tape.matmul(tape.tanh(pre), d.w_out));
        shift = tape.add(shift, d.b_out);
      }
    }

    std::vector<Id> vs;
    vs.reserve(r);
    for (std::size_t k = 0; k < r; ++k) {
      Id v_raw = tape.slice_cols(raw, (2 + k) * p, p);
      Id norm2 = tape.row_sum(tape.mul(v_raw, v_raw));
      const num::Tensor& norms = tape.value(norm2);
      std::size_t degenerate = 0;
      for (std::size_t i = 0; i < batch; ++i) {
        if (norms[i] < 1e-30) ++degenerate;
      }
      if (degenerate) {
        // A vanishing raw direction falls back to the first coordinate
        // axis so the reflection stays well defined.
        num::Tensor mask({batch, p});
        for (std::size_t i = 0; i < batch; ++i) {
          if (norms[i] < 1e-30) mask[i * p] = 1.0;
        }
        v_raw = tape.add(v_raw, tape.input(mask));
        norm2 = tape.row_sum(tape.mul(v_raw, v_raw));
        result.fallback_count += degenerate;
      }
      const Id inv = tape.reciprocal(tape.sqrt(norm2));
      vs.push_back(tape.row_scale(inv, v_raw));
    }

    Id w = tape.slice_cols(y0_id, j * p, p);
    if (shift != -1) w = tape.add(w, shift);
    for (std::size_t k = 0; k < r; ++k) {
      w = reflect(tape, w, vs[k], batch, p);
    }
    w = tape.mul(lam, w);
    for (std::size_t k = r; k-- > 0;) {
      w = reflect(tape, w, vs[k], batch, p);
    }
    patches.push_back(w);

    if (want_factors) {
      SPDFactors f;
      f.eigenvalues = tape.value(lam);
      f.shift = shift != -1 ? tape.value(shift)
                            : num::Tensor({batch, p});
      for (Id v : vs) f.reflections.push_back(tape.value(v));
      result.factors.push_back(std::move(f));
    }
  }

  result.prediction =
      patches.size() == 1 ? patches[0] : tape.concat_cols(patches);
  return result;
}

num::Tensor draw_noise(rng::Stream& stream, std::size_t rows,
                       std::size_t cols, double a) {
  num::Tensor t({rows, cols});
  const double s = std::sqrt(a);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = s * stream.normal();
  return t;
}

std::uint64_t reflection_madds() { return g_reflection_madds; }
void reset_reflection_madds() { g_reflection_madds = 0; }

namespace {

constexpr char kMagic[8] = {'F', 'E', 'R', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const FernParameters& params, const FernConfig& config) {
  nlohmann::json manifest;
  manifest["config"] = nlohmann::json::parse(config.to_json());
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  params.for_each([&manifest, &offset](const std::string& name,
                                       const num::Tensor& t) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["count"] = t.size();
    manifest["tensors"].push_back(std::move(e));
    offset += t.size();
  });
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  params.for_each([&out](const std::string&, const num::Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) fail("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(path.string() + " is not a checkpoint");
  }
  const std::uint32_t version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_size = read_pod<std::uint64_t>(in);
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) fail("truncated checkpoint header");
  const nlohmann::json manifest = nlohmann::json::parse(header);

  Checkpoint ck;
  ck.config = FernConfig::from_json(manifest.at("config").dump());
  ck.params = make_skeleton(ck.config);

  std::map<std::string, nlohmann::json> entries;
  for (const nlohmann::json& e : manifest.at("tensors")) {
    entries[e.at("name").get<std::string>()] = e;
  }
  const std::streampos blob_start = in.tellg();
  std::size_t consumed = 0;
  ck.params.for_each([&](const std::string& name, num::Tensor& t) {
    const auto it = entries.find(name);
    if (it == entries.end()) fail("checkpoint is missing tensor " + name);
    const auto shape = it->second.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape()) {
      fail("checkpoint tensor " + name + " has the wrong shape");
    }
    const std::size_t offset = it->second.at("offset").get<std::size_t>();
    in.seekg(blob_start + static_cast<std::streamoff>(offset *
                                                      sizeof(double)));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) fail("truncated checkpoint payload at " + name);
    if (!t.all_finite()) fail("checkpoint tensor " + name + " is not finite");
    consumed += 1;
  });
  if (consumed != entries.size()) {
    fail("checkpoint holds tensors the configuration does not expect");
  }
  return ck;
}

}  // namespace fern::model
