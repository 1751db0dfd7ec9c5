#include "hntt/nn.hpp"

#include <cmath>
#include <random>

#include "hntt/error.hpp"

namespace hntt::nn {
namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

Matrix tanh_of(const Matrix& z) { return z.array().tanh().matrix(); }

}  // namespace

int NetShape::conv1_length() const {
  if (depth_inputs <= 0) return 0;
  return (depth_inputs - conv1_kernel) / conv1_stride + 1;
}

int NetShape::conv2_length() const {
  if (depth_inputs <= 0) return 0;
  return (conv1_length() - conv2_kernel) / conv2_stride + 1;
}

int NetShape::depth_features() const {
  return depth_inputs > 0 ? conv2_channels * conv2_length() : 0;
}

std::size_t NetShape::param_count() const {
  std::size_t n = 0;
  if (depth_inputs > 0) {
    n += static_cast<std::size_t>(conv1_channels * conv1_kernel + conv1_channels);
    n += static_cast<std::size_t>(conv2_channels * conv1_channels * conv2_kernel + conv2_channels);
  }
  n += static_cast<std::size_t>(hidden * trunk_inputs() + hidden);
  n += static_cast<std::size_t>(hidden * hidden + hidden);
  n += static_cast<std::size_t>(actions * hidden + actions);
  n += static_cast<std::size_t>(hidden + 1);
  return n;
}

nlohmann::json to_json(const NetShape& s) {
  return {{"symbolic_inputs", s.symbolic_inputs}, {"depth_inputs", s.depth_inputs},
          {"conv1_channels", s.conv1_channels},   {"conv1_kernel", s.conv1_kernel},
          {"conv1_stride", s.conv1_stride},       {"conv2_channels", s.conv2_channels},
          {"conv2_kernel", s.conv2_kernel},       {"conv2_stride", s.conv2_stride},
          {"hidden", s.hidden},                   {"actions", s.actions}};
}

NetShape net_shape_from_json(const nlohmann::json& j) {
  NetShape s;
  s.symbolic_inputs = j.at("symbolic_inputs").get<int>();
  s.depth_inputs = j.at("depth_inputs").get<int>();
  s.conv1_channels = j.at("conv1_channels").get<int>();
  s.conv1_kernel = j.at("conv1_kernel").get<int>();
  s.conv1_stride = j.at("conv1_stride").get<int>();
  s.conv2_channels = j.at("conv2_channels").get<int>();
  s.conv2_kernel = j.at("conv2_kernel").get<int>();
  s.conv2_stride = j.at("conv2_stride").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.actions = j.at("actions").get<int>();
  return s;
}

DropoutMasks make_dropout_masks(int hidden, int batch, double rate, std::uint64_t seed) {
  DropoutMasks m{Matrix::Ones(hidden, batch), Matrix::Ones(hidden, batch)};
  if (rate <= 0.0) return m;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Matrix* mat : {&m.hidden1, &m.hidden2}) {
    for (Eigen::Index c = 0; c < mat->cols(); ++c) {
      for (Eigen::Index r = 0; r < mat->rows(); ++r) (*mat)(r, c) = keep(rng) ? scale : 0.0;
    }
  }
  return m;
}

PolicyNetwork::PolicyNetwork(const NetShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.symbolic_inputs <= 0 || shape.actions <= 0 || shape.hidden <= 0) {
    throw ShapeError("network needs positive symbolic inputs, hidden width and actions");
  }
  if (shape.depth_inputs > 0 && shape.conv2_length() <= 0) {
    throw ShapeError("depth input too short for the convolution stack");
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(shape.param_count()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Offsets o = offsets();
  auto fill = [&](std::size_t offset, std::size_t count, double stddev) {
    for (std::size_t i = 0; i < count; ++i) params_[static_cast<Eigen::Index>(offset + i)] = stddev * normal(rng);
  };
  const auto& s = shape_;
  if (s.depth_inputs > 0) {
    fill(o.conv1_w, static_cast<std::size_t>(s.conv1_channels * s.conv1_kernel), 1.0 / std::sqrt(s.conv1_kernel));
    fill(o.conv2_w, static_cast<std::size_t>(s.conv2_channels * s.conv1_channels * s.conv2_kernel),
         1.0 / std::sqrt(s.conv1_channels * s.conv2_kernel));
  }
  fill(o.fc1_w, static_cast<std::size_t>(s.hidden * s.trunk_inputs()), 1.0 / std::sqrt(s.trunk_inputs()));
  fill(o.fc2_w, static_cast<std::size_t>(s.hidden * s.hidden), 1.0 / std::sqrt(s.hidden));
  fill(o.pi_w, static_cast<std::size_t>(s.actions * s.hidden), 0.01 / std::sqrt(s.hidden));
  fill(o.v_w, static_cast<std::size_t>(s.hidden), 1.0 / std::sqrt(s.hidden));
}

PolicyNetwork::PolicyNetwork(const NetShape& shape, Vector params)
    : shape_(shape), params_(std::move(params)) {
  if (static_cast<std::size_t>(params_.size()) != shape_.param_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params_.size()) +
                     " entries, shape requires " + std::to_string(shape_.param_count()));
  }
}

PolicyNetwork::Offsets PolicyNetwork::offsets() const {
  const auto& s = shape_;
  Offsets o{};
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    const std::size_t here = at;
    at += n;
    return here;
  };
  const bool depth = s.depth_inputs > 0;
  o.conv1_w = take(depth ? static_cast<std::size_t>(s.conv1_channels * s.conv1_kernel) : 0);
  o.conv1_b = take(depth ? static_cast<std::size_t>(s.conv1_channels) : 0);
  o.conv2_w = take(depth ? static_cast<std::size_t>(s.conv2_channels * s.conv1_channels * s.conv2_kernel) : 0);
  o.conv2_b = take(depth ? static_cast<std::size_t>(s.conv2_channels) : 0);
  o.fc1_w = take(static_cast<std::size_t>(s.hidden * s.trunk_inputs()));
  o.fc1_b = take(static_cast<std::size_t>(s.hidden));
  o.fc2_w = take(static_cast<std::size_t>(s.hidden * s.hidden));
  o.fc2_b = take(static_cast<std::size_t>(s.hidden));
  o.pi_w = take(static_cast<std::size_t>(s.actions * s.hidden));
  o.pi_b = take(static_cast<std::size_t>(s.actions));
  o.v_w = take(static_cast<std::size_t>(s.hidden));
  o.v_b = take(1);
  return o;
}

ForwardPass PolicyNetwork::forward(const Matrix& inputs, const DropoutMasks* masks) const {
  const auto& s = shape_;
  if (inputs.rows() != s.input_size()) {
    throw ShapeError("network expects " + std::to_string(s.input_size()) + " inputs, got " +
                     std::to_string(inputs.rows()));
  }
  const Eigen::Index batch = inputs.cols();
  const Offsets o = offsets();
  const double* p = params_.data();
  ForwardPass fp;
  fp.inputs = inputs;

  fp.trunk_in.resize(s.trunk_inputs(), batch);
  fp.trunk_in.topRows(s.symbolic_inputs) = inputs.topRows(s.symbolic_inputs);
  if (s.depth_inputs > 0) {
    const int l1 = s.conv1_length(), l2 = s.conv2_length();
    fp.conv1.resize(s.conv1_channels * l1, batch);
    fp.conv2.resize(s.conv2_channels * l2, batch);
    const double* w1 = p + o.conv1_w;
    const double* b1 = p + o.conv1_b;
    const double* w2 = p + o.conv2_w;
    const double* b2 = p + o.conv2_b;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const double* x = inputs.col(b).data() + s.symbolic_inputs;
      double* h1 = fp.conv1.col(b).data();
      for (int c = 0; c < s.conv1_channels; ++c) {
        for (int l = 0; l < l1; ++l) {
          double acc = b1[c];
          for (int k = 0; k < s.conv1_kernel; ++k) acc += w1[c * s.conv1_kernel + k] * x[l * s.conv1_stride + k];
          h1[c * l1 + l] = std::tanh(acc);
        }
      }
      double* h2 = fp.conv2.col(b).data();
      for (int c2 = 0; c2 < s.conv2_channels; ++c2) {
        for (int l = 0; l < l2; ++l) {
          double acc = b2[c2];
          for (int c1 = 0; c1 < s.conv1_channels; ++c1) {
            const double* w = w2 + (c2 * s.conv1_channels + c1) * s.conv2_kernel;
            const double* in = h1 + c1 * l1 + l * s.conv2_stride;
            for (int k = 0; k < s.conv2_kernel; ++k) acc += w[k] * in[k];
          }
          h2[c2 * l2 + l] = std::tanh(acc);
        }
      }
    }
    fp.trunk_in.bottomRows(s.depth_features()) = fp.conv2;
  }

  const ConstMap w_fc1(p + o.fc1_w, s.hidden, s.trunk_inputs());
  const ConstMap b_fc1(p + o.fc1_b, s.hidden, 1);
  const ConstMap w_fc2(p + o.fc2_w, s.hidden, s.hidden);
  const ConstMap b_fc2(p + o.fc2_b, s.hidden, 1);
  const ConstMap w_pi(p + o.pi_w, s.actions, s.hidden);
  const ConstMap b_pi(p + o.pi_b, s.actions, 1);
  const ConstMap w_v(p + o.v_w, 1, s.hidden);
  const double b_v = p[o.v_b];

  fp.hidden1 = tanh_of((w_fc1 * fp.trunk_in).colwise() + b_fc1.col(0));
  if (masks) {
    fp.mask1 = masks->hidden1;
    fp.mask2 = masks->hidden2;
  }
  fp.hidden1_out = masks ? fp.hidden1.cwiseProduct(masks->hidden1) : fp.hidden1;
  fp.hidden2 = tanh_of((w_fc2 * fp.hidden1_out).colwise() + b_fc2.col(0));
  fp.hidden2_out = masks ? fp.hidden2.cwiseProduct(masks->hidden2) : fp.hidden2;
  fp.logits = (w_pi * fp.hidden2_out).colwise() + b_pi.col(0);
  fp.values = (w_v * fp.hidden2_out).array() + b_v;
  return fp;
}

Vector PolicyNetwork::backward(const ForwardPass& fp, const Matrix& dlogits,
                               const RowVector& dvalues) const {
  const auto& s = shape_;
  const Offsets o = offsets();
  const double* p = params_.data();
  Vector grad = Vector::Zero(params_.size());
  double* g = grad.data();

  const ConstMap w_fc1(p + o.fc1_w, s.hidden, s.trunk_inputs());
  const ConstMap w_fc2(p + o.fc2_w, s.hidden, s.hidden);
  const ConstMap w_pi(p + o.pi_w, s.actions, s.hidden);
  const ConstMap w_v(p + o.v_w, 1, s.hidden);

  MutMap(g + o.pi_w, s.actions, s.hidden).noalias() = dlogits * fp.hidden2_out.transpose();
  MutMap(g + o.pi_b, s.actions, 1) = dlogits.rowwise().sum();
  MutMap(g + o.v_w, 1, s.hidden).noalias() = dvalues * fp.hidden2_out.transpose();
  g[o.v_b] = dvalues.sum();

  Matrix dh2 = w_pi.transpose() * dlogits + w_v.transpose() * dvalues;
  Matrix dz2 = fp.mask2.size() ? dh2.cwiseProduct(fp.mask2) : dh2;
  dz2.array() *= 1.0 - fp.hidden2.array().square();
  MutMap(g + o.fc2_w, s.hidden, s.hidden).noalias() = dz2 * fp.hidden1_out.transpose();
  MutMap(g + o.fc2_b, s.hidden, 1) = dz2.rowwise().sum();

  Matrix dh1 = w_fc2.transpose() * dz2;
  Matrix dz1 = fp.mask1.size() ? dh1.cwiseProduct(fp.mask1) : dh1;
  dz1.array() *= 1.0 - fp.hidden1.array().square();
  MutMap(g + o.fc1_w, s.hidden, s.trunk_inputs()).noalias() = dz1 * fp.trunk_in.transpose();
  MutMap(g + o.fc1_b, s.hidden, 1) = dz1.rowwise().sum();

  if (s.depth_inputs > 0) {
    const Matrix dtrunk = w_fc1.transpose() * dz1;
    const int l1 = s.conv1_length(), l2 = s.conv2_length();
    const double* w2 = p + o.conv2_w;
    double* gw1 = g + o.conv1_w;
    double* gb1 = g + o.conv1_b;
    double* gw2 = g + o.conv2_w;
    double* gb2 = g + o.conv2_b;
    std::vector<double> dconv1(static_cast<std::size_t>(s.conv1_channels * l1));
    for (Eigen::Index b = 0; b < fp.inputs.cols(); ++b) {
      const double* x = fp.inputs.col(b).data() + s.symbolic_inputs;
      const double* h1 = fp.conv1.col(b).data();
      const double* h2 = fp.conv2.col(b).data();
      const double* dh = dtrunk.col(b).data() + s.symbolic_inputs;
      std::fill(dconv1.begin(), dconv1.end(), 0.0);
      for (int c2 = 0; c2 < s.conv2_channels; ++c2) {
        for (int l = 0; l < l2; ++l) {
          const int idx = c2 * l2 + l;
          const double dz = dh[idx] * (1.0 - h2[idx] * h2[idx]);
          gb2[c2] += dz;
          for (int c1 = 0; c1 < s.conv1_channels; ++c1) {
            const int wbase = (c2 * s.conv1_channels + c1) * s.conv2_kernel;
            const int ibase = c1 * l1 + l * s.conv2_stride;
            for (int k = 0; k < s.conv2_kernel; ++k) {
              gw2[wbase + k] += dz * h1[ibase + k];
              dconv1[static_cast<std::size_t>(ibase + k)] += dz * w2[wbase + k];
            }
          }
        }
      }
      for (int c = 0; c < s.conv1_channels; ++c) {
        for (int l = 0; l < l1; ++l) {
          const int idx = c * l1 + l;
          const double dz = dconv1[static_cast<std::size_t>(idx)] * (1.0 - h1[idx] * h1[idx]);
          gb1[c] += dz;
          for (int k = 0; k < s.conv1_kernel; ++k) gw1[c * s.conv1_kernel + k] += dz * x[l * s.conv1_stride + k];
        }
      }
    }
  }
  return grad;
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

}  // namespace hntt::nn
