#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>

#include "mindtrace/error.hpp"
#include "mindtrace/track.hpp"

namespace mindtrace {

namespace {

Eigen::Matrix<double, 2, 4> selection() {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 2) = 1.0;
  return h;
}

std::string dump(const StateEstimate& s) {
  std::ostringstream os;
  os << std::setprecision(10) << "t=" << s.time << " mean=[" << s.mean.transpose()
     << "] cov=[" << s.covariance.reshaped().transpose() << "]";
  return os.str();
}

}  // namespace

Eigen::Matrix4d MotionModel::transition(double dt) const {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 1) = dt;
  f(2, 3) = dt;
  return f;
}

Eigen::Matrix4d MotionModel::process_noise(double dt) const {
  Eigen::Matrix2d block;
  if (noise == ProcessNoise::ContinuousWhiteAcceleration) {
    block << dt * dt * dt / 3.0, dt * dt / 2.0,
             dt * dt / 2.0,      dt;
  } else {
    block << dt * dt * dt * dt / 4.0, dt * dt * dt / 2.0,
             dt * dt * dt / 2.0,      dt * dt;
  }
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q.block<2, 2>(0, 0) = sigma2 * block;
  q.block<2, 2>(2, 2) = sigma2 * block;
  return q;
}

void MotionModel::validate() const {
  if (!(sigma2 > 0.0)) throw ValidationError("process noise intensity must be positive");
  if (!(prior_position_variance > 0.0) || !(prior_velocity_variance > 0.0)) {
    throw ValidationError("prior variances must be positive");
  }
}

Eigen::Matrix2d StateEstimate::position_covariance() const {
  Eigen::Matrix2d p;
  p << covariance(0, 0), covariance(0, 2),
       covariance(2, 0), covariance(2, 2);
  return p;
}

StateEstimate initial_state(const MotionModel& motion, double time,
                            const Eigen::Vector2d& position_mean) {
  StateEstimate s;
  s.time = time;
  s.mean << position_mean(0), 0.0, position_mean(1), 0.0;
  s.covariance.setZero();
  s.covariance(0, 0) = motion.prior_position_variance;
  s.covariance(1, 1) = motion.prior_velocity_variance;
  s.covariance(2, 2) = motion.prior_position_variance;
  s.covariance(3, 3) = motion.prior_velocity_variance;
  return s;
}

Eigen::Matrix2d StateDependentNoise::covariance_at(const Eigen::Vector2d& position) const {
  const Moments reduced = reduce_mixture(measurement_mixture(position, model_));
  return reduced.covariance;
}

StateEstimate predict_state(const StateEstimate& state, double time, const MotionModel& motion) {
  const double dt = time - state.time;
  if (dt < 0.0) throw ValidationError("measurement time precedes the current state");
  const Eigen::Matrix4d f = motion.transition(dt);
  StateEstimate out;
  out.time = time;
  out.mean = f * state.mean;
  out.covariance = f * state.covariance * f.transpose() + motion.process_noise(dt);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

StateEstimate kalman_step(const StateEstimate& prior, const Eigen::Vector2d& z, double time,
                          const MotionModel& motion, const MeasurementNoise& noise) {
  const StateEstimate predicted = predict_state(prior, time, motion);
  const Eigen::Matrix2d r = noise.covariance_at(predicted.position());
  const auto h = selection();

  const Eigen::Matrix2d s = h * predicted.covariance * h.transpose() + r;
  Eigen::LLT<Eigen::Matrix2d> s_llt(s);
  if (s_llt.info() != Eigen::Success) {
    throw NumericalError("innovation covariance is not SPD: " + dump(predicted));
  }
  const Eigen::Matrix<double, 4, 2> gain =
      s_llt.solve(h * predicted.covariance).transpose();

  StateEstimate post;
  post.time = time;
  post.mean = predicted.mean + gain * (z - h * predicted.mean);
  // Joseph form keeps the update symmetric and positive semi-definite.
  const Eigen::Matrix4d i_kh = Eigen::Matrix4d::Identity() - gain * h;
  post.covariance = i_kh * predicted.covariance * i_kh.transpose() + gain * r * gain.transpose();
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());

  Eigen::LLT<Eigen::Matrix4d> check(post.covariance);
  if (check.info() != Eigen::Success) {
    throw NumericalError("posterior covariance is not SPD: " + dump(post));
  }
  return post;
}

StateEstimate kalman_step(const StateEstimate& prior, const Eigen::Vector2d& z, double time,
                          const MotionModel& motion, const CategoryModel& model) {
  return kalman_step(prior, z, time, motion, StateDependentNoise(model));
}

Track track_person(std::span<const TrackPoint> points, const MotionModel& motion,
                   const MeasurementNoise& noise, const std::optional<StateEstimate>& prior,
                   const LinearRegionClassifier* regions) {
  motion.validate();
  if (points.empty()) throw ValidationError("track needs at least one measurement");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].date < points[i - 1].date) {
      throw ValidationError("measurements are not in time order at index " + std::to_string(i));
    }
  }

  StateEstimate state = prior ? *prior : initial_state(motion, points.front().date.years());
  Track track;
  track.reserve(points.size());
  for (const auto& p : points) {
    TrackStep step;
    step.date = p.date;
    step.z = p.z;
    const StateEstimate predicted = predict_state(state, p.date.years(), motion);
    step.measurement_covariance = noise.covariance_at(predicted.position());
    state = kalman_step(state, p.z, p.date.years(), motion, noise);
    step.state = state;
    if (regions) step.region = regions->predict(state.position());
    track.push_back(std::move(step));
  }
  return track;
}

StateEstimate predict_future(const Track& track, double horizon, const MotionModel& motion) {
  if (track.empty()) throw ValidationError("cannot predict from an empty track");
  if (horizon < 0.0) throw ValidationError("prediction horizon must be non-negative");
  const auto& last = track.back().state;
  return predict_state(last, last.time + horizon, motion);
}

void write_track_csv(std::ostream& out, const Track& track,
                     std::span<const std::string> region_names) {
  out << "time,x1,x1_vel,x2,x2_vel";
  for (int i = 0; i < 16; ++i) out << ",cov_" << i;
  out << ",region_label,z1,z2\n";
  out << std::setprecision(17);
  for (const auto& step : track) {
    const auto& m = step.state.mean;
    out << step.date.iso() << ',' << m(0) << ',' << m(1) << ',' << m(2) << ',' << m(3);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) out << ',' << step.state.covariance(r, c);
    }
    out << ',';
    if (step.region) {
      const auto idx = static_cast<std::size_t>(*step.region);
      if (idx < region_names.size()) {
        out << region_names[idx];
      } else {
        out << *step.region;
      }
    }
    out << ',' << step.z(0) << ',' << step.z(1) << '\n';
  }
}

}  // namespace mindtrace
