#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairsvm/error.hpp"

namespace fairsvm {

using Index = Eigen::Index;

/// Binary sensitive attribute value.
enum class Group : std::uint8_t { a = 0, b = 1 };

inline const char* to_string(Group g) { return g == Group::a ? "a" : "b"; }

/// Class label restricted to -1 / +1.
using Label = int;

/// Feature matrix with +-1 labels and a binary sensitive group per row.
struct GroupedDataset {
  Eigen::MatrixXd x;  // n x d, one sample per row
  std::vector<Label> y;
  std::vector<Group> s;
  std::vector<std::string> feature_names;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }

  Index count(Group g, Label label) const {
    Index c = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (s[i] == g && y[i] == label) ++c;
    }
    return c;
  }

  Index count_label(Label label) const {
    Index c = 0;
    for (Label l : y) c += (l == label);
    return c;
  }

  /// Throws InputError unless rows, labels and groups line up and labels are +-1.
  void validate() const {
    if (x.rows() < 1) throw InputError("dataset is empty");
    if (static_cast<Index>(y.size()) != x.rows() ||
        static_cast<Index>(s.size()) != x.rows()) {
      throw InputError("dataset has " + std::to_string(x.rows()) + " rows but " +
                       std::to_string(y.size()) + " labels and " +
                       std::to_string(s.size()) + " group tags");
    }
    for (Label l : y) {
      if (l != 1 && l != -1) {
        throw InputError("labels must be -1 or +1, got " + std::to_string(l));
      }
    }
    if (!feature_names.empty() &&
        static_cast<Index>(feature_names.size()) != x.cols()) {
      throw InputError("feature_names does not match the feature dimension");
    }
  }

  /// Rows selected by `indices`, in that order.
  GroupedDataset subset(std::span<const Index> indices) const {
    GroupedDataset out;
    out.x.resize(static_cast<Index>(indices.size()), x.cols());
    out.y.reserve(indices.size());
    out.s.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const Index i = indices[k];
      if (i < 0 || i >= x.rows()) throw InputError("subset index out of range");
      out.x.row(static_cast<Index>(k)) = x.row(i);
      out.y.push_back(y[static_cast<std::size_t>(i)]);
      out.s.push_back(s[static_cast<std::size_t>(i)]);
    }
    out.feature_names = feature_names;
    return out;
  }
};

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace detail

/// Content hash (FNV-1a 64) over shape, features, labels and groups.
inline std::string fingerprint(const GroupedDataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::int64_t shape[2] = {d.x.rows(), d.x.cols()};
  detail::fnv1a(h, shape, sizeof(shape));
  for (Index i = 0; i < d.x.rows(); ++i) {
    for (Index j = 0; j < d.x.cols(); ++j) {
      const double v = d.x(i, j);
      detail::fnv1a(h, &v, sizeof(v));
    }
  }
  for (Label l : d.y) {
    const std::int8_t v = static_cast<std::int8_t>(l);
    detail::fnv1a(h, &v, 1);
  }
  for (Group g : d.s) {
    const auto v = static_cast<std::uint8_t>(g);
    detail::fnv1a(h, &v, 1);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fairsvm
