#include "topoloc/state.hpp"

namespace topoloc {

NominalState box_plus(const NominalState& x, const ErrorState& dx) {
  NominalState out;
  out.rotation = x.rotation * so3_exp(dx.segment<3>(block::kTheta));
  out.position = x.position + dx.segment<3>(block::kPos);
  out.velocity = x.velocity + dx.segment<3>(block::kVel);
  out.bias_acc = x.bias_acc + dx.segment<3>(block::kBiasAcc);
  out.bias_gyro = x.bias_gyro + dx.segment<3>(block::kBiasGyro);
  out.gravity = x.gravity + dx.segment<3>(block::kGravity);
  return out;
}

ErrorState box_minus(const NominalState& x1, const NominalState& x2) {
  ErrorState d;
  d.segment<3>(block::kTheta) = so3_log(x2.rotation.inverse() * x1.rotation);
  d.segment<3>(block::kPos) = x1.position - x2.position;
  d.segment<3>(block::kVel) = x1.velocity - x2.velocity;
  d.segment<3>(block::kBiasAcc) = x1.bias_acc - x2.bias_acc;
  d.segment<3>(block::kBiasGyro) = x1.bias_gyro - x2.bias_gyro;
  d.segment<3>(block::kGravity) = x1.gravity - x2.gravity;
  return d;
}

}  // namespace topoloc
