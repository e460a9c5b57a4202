#include "steer/nn/field.hpp"

#include <sstream>

#include "steer/error.hpp"
#include "steer/imaging/rotate.hpp"

namespace steer::nn {

FieldType::FieldType(int order, std::vector<groups::Representation> reps) : order_(order), reps_(std::move(reps)) {
  if (reps_.empty()) throw Error(ErrorKind::InvalidArgument, "a field type needs at least one field");
  for (const auto& r : reps_) {
    if (r.order() != order_) throw Error(ErrorKind::InvalidArgument, "all fields must share the group order");
    offsets_.push_back(channels_);
    channels_ += static_cast<std::size_t>(r.dim());
  }
}

FieldType FieldType::trivial(int order, std::size_t count) {
  return FieldType(order, std::vector<groups::Representation>(count, groups::Representation::trivial(order)));
}

FieldType FieldType::regular(int order, std::size_t count) {
  return FieldType(order, std::vector<groups::Representation>(count, groups::Representation::regular(order)));
}

bool FieldType::all_permutation() const {
  for (const auto& r : reps_)
    if (!r.is_permutation()) return false;
  return true;
}

std::string FieldType::describe() const {
  std::ostringstream os;
  os << "C" << order_ << "[";
  for (std::size_t k = 0; k < reps_.size();) {
    std::size_t run = k;
    while (run < reps_.size() && reps_[run].name() == reps_[k].name()) ++run;
    if (k) os << " + ";
    os << (run - k) << "x" << reps_[k].name();
    k = run;
  }
  os << "]";
  return os.str();
}

bool operator==(const FieldType& a, const FieldType& b) {
  if (a.order_ != b.order_ || a.reps_.size() != b.reps_.size()) return false;
  for (std::size_t k = 0; k < a.reps_.size(); ++k) {
    if (a.reps_[k].name() != b.reps_[k].name() || a.reps_[k].dim() != b.reps_[k].dim()) return false;
  }
  return true;
}

ad::Tensor rotate_field(const ad::Tensor& x, const FieldType& field, const groups::GroupElement& g) {
  if (x.rank() != 4 || x.dim(1) != field.channels()) {
    throw Error(ErrorKind::ShapeMismatch, "rotate_field: expected [N, " + std::to_string(field.channels()) +
                                              ", H, W], got " + ad::shape_to_string(x.shape()));
  }
  if (g.order() != field.order()) throw Error(ErrorKind::InvalidArgument, "rotate_field: group order mismatch");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), plane = h * w;
  if (h != w) throw Error(ErrorKind::ShapeMismatch, "rotate_field: planes must be square");

  std::vector<double> spatial(x.size());
  auto in = x.values();
  for (std::size_t p = 0; p < n * c; ++p) {
    auto src = in.subspan(p * plane, plane);
    auto dst = std::span<double>(spatial).subspan(p * plane, plane);
    if (g.is_quarter_turn()) imaging::rotate_plane_quarter(src, h, g.quarter_turns(), dst);
    else imaging::rotate_plane(src, h, w, g.angle(), dst);
  }

  std::vector<double> out(x.size(), 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < field.size(); ++k) {
      const auto& rho = field.reps()[k].matrix(g);
      const std::size_t off = field.offset(k), d = field.width(k);
      for (std::size_t i = 0; i < d; ++i) {
        double* dst = out.data() + (b * c + off + i) * plane;
        for (std::size_t j = 0; j < d; ++j) {
          const double a = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (a == 0.0) continue;
          const double* src = spatial.data() + (b * c + off + j) * plane;
          for (std::size_t q = 0; q < plane; ++q) dst[q] += a * src[q];
        }
      }
    }
  }
  return ad::Tensor::from(x.shape(), std::move(out));
}

}  // namespace steer::nn
