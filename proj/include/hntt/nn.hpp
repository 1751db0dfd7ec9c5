#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace hntt::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Architecture of the actor-critic network. Inputs are column vectors laid
// out as [symbolic features | depth features]. When depth_inputs > 0 the
// depth block first passes through two strided 1-D convolutions with tanh;
// the flattened result is concatenated with the symbolic block and fed to
// a two-layer tanh trunk shared by a categorical policy head and a scalar
// value head.
struct NetShape {
  int symbolic_inputs = 0;
  int depth_inputs = 0;
  int conv1_channels = 8;
  int conv1_kernel = 5;
  int conv1_stride = 2;
  int conv2_channels = 8;
  int conv2_kernel = 3;
  int conv2_stride = 2;
  int hidden = 128;
  int actions = 0;

  int input_size() const { return symbolic_inputs + depth_inputs; }
  int conv1_length() const;
  int conv2_length() const;
  int depth_features() const;  // flattened conv output size (0 without depth)
  int trunk_inputs() const { return symbolic_inputs + depth_features(); }
  std::size_t param_count() const;

  bool operator==(const NetShape&) const = default;
};

nlohmann::json to_json(const NetShape& s);
NetShape net_shape_from_json(const nlohmann::json& j);

// Inverted-dropout masks for the two trunk layers (entries 0 or 1/(1-p)).
struct DropoutMasks {
  Matrix hidden1;
  Matrix hidden2;
};
DropoutMasks make_dropout_masks(int hidden, int batch, double rate, std::uint64_t seed);

struct ForwardPass {
  Matrix inputs;
  Matrix conv1;  // (conv1_channels * conv1_length) x batch, post-tanh
  Matrix conv2;  // post-tanh
  Matrix trunk_in;
  Matrix hidden1;  // post-tanh, pre-dropout
  Matrix hidden1_out;  // post-dropout
  Matrix hidden2;
  Matrix hidden2_out;
  Matrix mask1;  // empty when no dropout was applied
  Matrix mask2;
  Matrix logits;  // actions x batch
  RowVector values;
};

class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(const NetShape& shape, std::uint64_t seed);
  PolicyNetwork(const NetShape& shape, Vector params);

  const NetShape& shape() const { return shape_; }
  const Vector& params() const { return params_; }
  Vector& mutable_params() { return params_; }

  ForwardPass forward(const Matrix& inputs, const DropoutMasks* masks = nullptr) const;

  // Gradient of a scalar objective with respect to all parameters, given
  // its gradient with respect to logits and values.
  Vector backward(const ForwardPass& fp, const Matrix& dlogits, const RowVector& dvalues) const;

 private:
  struct Offsets {
    std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b, pi_w, pi_b, v_w, v_b;
  };
  Offsets offsets() const;

  NetShape shape_;
  Vector params_;
};

// Row-wise numerically stable log-softmax over each column.
Matrix log_softmax(const Matrix& logits);

}  // namespace hntt::nn
