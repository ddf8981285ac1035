#include "hagi/baselines.hpp"

namespace hagi {
namespace {

std::vector<Eigen::Index> anchors(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning) {
  if (static_cast<std::size_t>(angles.rows()) != conditioning.size()) {
    throw ValidationError("imputation: mask length does not match the sequence");
  }
  std::vector<Eigen::Index> out;
  for (Eigen::Index l = 0; l < angles.rows(); ++l)
    if (conditioning[static_cast<std::size_t>(l)]) out.push_back(l);
  if (out.empty()) throw ValidationError("imputation needs at least one observed frame");
  return out;
}

}  // namespace

MatrixXd linear_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning) {
  const auto obs = anchors(angles, conditioning);
  MatrixXd out = angles;
  std::size_t next = 0;  // first anchor >= l
  for (Eigen::Index l = 0; l < angles.rows(); ++l) {
    if (conditioning[static_cast<std::size_t>(l)]) continue;
    while (next < obs.size() && obs[next] < l) ++next;
    if (next == 0) {
      out.row(l) = angles.row(obs.front());
    } else if (next == obs.size()) {
      out.row(l) = angles.row(obs.back());
    } else {
      const Eigen::Index a = obs[next - 1];
      const Eigen::Index b = obs[next];
      const double w = static_cast<double>(l - a) / static_cast<double>(b - a);
      out.row(l) = (1.0 - w) * angles.row(a) + w * angles.row(b);
    }
  }
  return out;
}

MatrixXd nearest_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning) {
  const auto obs = anchors(angles, conditioning);
  MatrixXd out = angles;
  std::size_t next = 0;
  for (Eigen::Index l = 0; l < angles.rows(); ++l) {
    if (conditioning[static_cast<std::size_t>(l)]) continue;
    while (next < obs.size() && obs[next] < l) ++next;
    Eigen::Index pick;
    if (next == 0) {
      pick = obs.front();
    } else if (next == obs.size()) {
      pick = obs.back();
    } else {
      const Eigen::Index a = obs[next - 1];
      const Eigen::Index b = obs[next];
      pick = (l - a) <= (b - l) ? a : b;
    }
    out.row(l) = angles.row(pick);
  }
  return out;
}

MatrixXd head_direction_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning) {
  if (static_cast<std::size_t>(angles.rows()) != conditioning.size()) {
    throw ValidationError("imputation: mask length does not match the sequence");
  }
  MatrixXd out = angles;
  for (Eigen::Index l = 0; l < angles.rows(); ++l)
    if (!conditioning[static_cast<std::size_t>(l)]) out.row(l).setZero();
  return out;
}

MatrixXd hidden_rows(const MatrixXd& full, const std::vector<std::uint8_t>& conditioning) {
  Eigen::Index n = 0;
  for (auto c : conditioning) n += c ? 0 : 1;
  MatrixXd out(n, full.cols());
  Eigen::Index r = 0;
  for (Eigen::Index l = 0; l < full.rows(); ++l)
    if (!conditioning[static_cast<std::size_t>(l)]) out.row(r++) = full.row(l);
  return out;
}

}  // namespace hagi
