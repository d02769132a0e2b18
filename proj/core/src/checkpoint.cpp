#include "adaptvo/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "adaptvo/error.hpp"

namespace adaptvo {
namespace {

class Writer {
 public:
  void line(const std::string& s) { out_ << s << '\n'; }
  void values(const double* v, Eigen::Index n) {
    char buf[40];
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      if (i) out_ << ' ';
      out_ << buf;
    }
    out_ << '\n';
  }
  void vec(const Eigen::VectorXd& v) { values(v.data(), v.size()); }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& text) : in_(text) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of checkpoint");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) fail("expected '" + w + "' but found '" + got + "'");
  }
  long long integer() {
    const std::string w = word();
    try {
      std::size_t used = 0;
      const long long v = std::stoll(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception&) {
      fail("not an integer: '" + w + "'");
    }
  }
  double real() {
    const std::string w = word();
    try {
      std::size_t used = 0;
      const double v = std::stod(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception&) {
      fail("not a number: '" + w + "'");
    }
  }
  Eigen::VectorXd vec(long long n) {
    if (n < 0 || n > 100000000) fail("implausible vector length");
    Eigen::VectorXd v(n);
    for (long long i = 0; i < n; ++i) v(i) = real();
    return v;
  }
  [[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::CorruptCheckpoint, msg); }

 private:
  std::istringstream in_;
};

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

Activation parse_activation(Reader& r) {
  const std::string w = r.word();
  if (w == "tanh") return Activation::Tanh;
  if (w == "relu") return Activation::Relu;
  if (w == "identity") return Activation::Identity;
  r.fail("unknown activation '" + w + "'");
}

void write_mlp(Writer& w, const char* name, const MlpNet& net) {
  std::string head = std::string("mlp ") + name + " " + activation_name(net.hidden) + " " +
                     std::to_string(net.sizes.size());
  for (int s : net.sizes) head += " " + std::to_string(s);
  w.line(head);
  for (int l = 0; l < net.num_layers(); ++l) {
    w.values(net.weights[l].data(), net.weights[l].size());
    w.vec(net.biases[l]);
  }
}

MlpNet read_mlp(Reader& r, const char* name) {
  r.expect("mlp");
  r.expect(name);
  const Activation act = parse_activation(r);
  const long long n = r.integer();
  if (n < 2 || n > 64) r.fail("implausible layer count");
  std::vector<int> sizes;
  for (long long i = 0; i < n; ++i) {
    const long long s = r.integer();
    if (s < 1 || s > 1000000) r.fail("implausible layer size");
    sizes.push_back(static_cast<int>(s));
  }
  MlpNet net = MlpNet::zeros(sizes, act);
  for (int l = 0; l < net.num_layers(); ++l) {
    auto& wt = net.weights[l];
    wt = r.vec(wt.size()).reshaped(wt.rows(), wt.cols());
    net.biases[l] = r.vec(net.biases[l].size());
  }
  return net;
}

void write_adam(Writer& w, const char* name, const AdamState& s) {
  w.line(std::string("adam ") + name + " " + std::to_string(s.t) + " " + std::to_string(s.m.size()));
  w.vec(s.m);
  w.vec(s.v);
}

AdamState read_adam(Reader& r, const char* name) {
  r.expect("adam");
  r.expect(name);
  AdamState s;
  s.t = r.integer();
  const long long n = r.integer();
  s.m = r.vec(n);
  s.v = r.vec(n);
  return s;
}

void write_encoder(Writer& w, const ConvEncoder& e) {
  for (const auto& l : e.conv) {
    w.line("conv " + std::to_string(l.in_channels) + " " + std::to_string(l.out_channels));
    w.values(l.weights.data(), static_cast<Eigen::Index>(l.weights.size()));
    w.values(l.biases.data(), static_cast<Eigen::Index>(l.biases.size()));
  }
  w.line("proj " + std::to_string(e.proj_w.rows()) + " " + std::to_string(e.proj_w.cols()));
  w.values(e.proj_w.data(), e.proj_w.size());
  w.vec(e.proj_b);
}

ConvEncoder read_encoder(Reader& r) {
  ConvEncoder e = ConvEncoder::zeros();
  for (auto& l : e.conv) {
    r.expect("conv");
    if (r.integer() != l.in_channels || r.integer() != l.out_channels) r.fail("encoder channel mismatch");
    for (double& v : l.weights) v = r.real();
    for (double& v : l.biases) v = r.real();
  }
  r.expect("proj");
  if (r.integer() != e.proj_w.rows() || r.integer() != e.proj_w.cols()) r.fail("encoder projection mismatch");
  e.proj_w = r.vec(e.proj_w.size()).reshaped(e.proj_w.rows(), e.proj_w.cols());
  e.proj_b = r.vec(e.proj_b.size());
  return e;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  return a.model == b.model && a.update_index == b.update_index && a.actor_opt == b.actor_opt &&
         a.critic_opt == b.critic_opt && a.reference == b.reference;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  const PolicyModel& m = c.model;
  Writer w;
  w.line("adaptvo-checkpoint " + std::to_string(kCheckpointVersion));
  w.line(std::string("obs_mode ") + to_string(m.mode));
  w.line("max_features " + std::to_string(m.max_features));
  w.line("horizon " + std::to_string(m.horizon));
  w.line("update_index " + std::to_string(c.update_index));
  if (c.reference) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "reference %d %d %.17g", c.reference->fast_threshold, c.reference->klt_patch_size,
                  c.reference->ransac_threshold);
    w.line(buf);
  } else {
    w.line("reference none");
  }
  w.line("normalizer " + std::to_string(m.normalizer.mean.size()));
  w.vec(m.normalizer.mean);
  w.vec(m.normalizer.std);
  w.line("log_std");
  w.vec(m.log_std);
  write_mlp(w, "actor", m.actor);
  write_mlp(w, "critic", m.critic);
  if (m.encoder) {
    w.line("encoder 1");
    write_encoder(w, *m.encoder);
  } else {
    w.line("encoder 0");
  }
  write_adam(w, "actor", c.actor_opt);
  write_adam(w, "critic", c.critic_opt);
  w.line("end");
  return w.str();
}

Checkpoint deserialize_checkpoint(const std::string& text) {
  Reader r(text);
  r.expect("adaptvo-checkpoint");
  const long long version = r.integer();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  PolicyModel& m = c.model;
  r.expect("obs_mode");
  try {
    m.mode = obs_mode_from_string(r.word());
  } catch (const Error& e) {
    r.fail(e.what());
  }
  r.expect("max_features");
  m.max_features = static_cast<int>(r.integer());
  r.expect("horizon");
  m.horizon = static_cast<int>(r.integer());
  if (m.horizon < 1) r.fail("horizon must be >= 1");
  r.expect("update_index");
  c.update_index = r.integer();
  r.expect("reference");
  const std::string ref = r.word();
  if (ref != "none") {
    FrontendParams p;
    try {
      p.fast_threshold = std::stoi(ref);
    } catch (const std::exception&) {
      r.fail("bad reference parameters");
    }
    p.klt_patch_size = static_cast<int>(r.integer());
    p.ransac_threshold = r.real();
    try {
      p.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
    c.reference = p;
  }
  r.expect("normalizer");
  const long long dim = r.integer();
  if (dim != m.obs_dim()) r.fail("normalizer dimension does not match the observation mode");
  m.normalizer.mean = r.vec(dim);
  m.normalizer.std = r.vec(dim);
  r.expect("log_std");
  m.log_std = r.vec(kActionDim);
  m.actor = read_mlp(r, "actor");
  m.critic = read_mlp(r, "critic");
  if (m.actor.input_dim() != m.obs_dim() || m.actor.output_dim() != kActionDim)
    r.fail("actor shape does not match the observation/action dimensions");
  if (m.critic.input_dim() != m.critic_dim() || m.critic.output_dim() != 1)
    r.fail("critic shape does not match the privileged input");
  r.expect("encoder");
  if (r.integer() == 1) m.encoder = read_encoder(r);
  if (m.mode == ObsMode::Encoder && !m.encoder) r.fail("encoder mode checkpoint without encoder weights");
  c.actor_opt = read_adam(r, "actor");
  c.critic_opt = read_adam(r, "critic");
  r.expect("end");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::string serialize_encoder(const ConvEncoder& encoder) {
  Writer w;
  w.line("adaptvo-encoder " + std::to_string(kCheckpointVersion));
  write_encoder(w, encoder);
  w.line("end");
  return w.str();
}

ConvEncoder deserialize_encoder(const std::string& text) {
  Reader r(text);
  r.expect("adaptvo-encoder");
  const long long version = r.integer();
  if (version != kCheckpointVersion) r.fail("unsupported encoder version " + std::to_string(version));
  ConvEncoder e = read_encoder(r);
  r.expect("end");
  return e;
}

void save_encoder(const std::filesystem::path& path, const ConvEncoder& encoder) {
  write_file(path, serialize_encoder(encoder));
}

ConvEncoder load_encoder(const std::filesystem::path& path) { return deserialize_encoder(read_file(path)); }

}  // namespace adaptvo
