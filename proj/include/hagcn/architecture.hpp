#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hagcn {

struct GconvDesc {
  std::vector<int> orders;
  bool adaptive = false;
  friend bool operator==(const GconvDesc&, const GconvDesc&) = default;
};
struct FcDesc {
  int width = 0;
  friend bool operator==(const FcDesc&, const FcDesc&) = default;
};
struct ReluDesc {
  friend bool operator==(const ReluDesc&, const ReluDesc&) = default;
};
struct SoftmaxDesc {
  friend bool operator==(const SoftmaxDesc&, const SoftmaxDesc&) = default;
};
struct DconvDesc {
  friend bool operator==(const DconvDesc&, const DconvDesc&) = default;
};

using LayerDesc = std::variant<GconvDesc, FcDesc, ReluDesc, SoftmaxDesc, DconvDesc>;

struct ArchitectureSpec {
  std::vector<LayerDesc> layers;
  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::invalid_argument(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Dash-separated layer tokens:
///   gcn_{1,2} | gcn{1,2} | adp_gcn_{1,2} | adp_gcn{1,2}   graph convolution over orders
///   fc<width> | ReLU | softmax | dconv
///   [tokens]*r                                           r-fold repetition
ArchitectureSpec parse_architecture(std::string_view text);

/// Canonical spelling (gcn_{..}, repetitions expanded). parse(to_string(s)) == s.
std::string to_string(const ArchitectureSpec& spec);
std::string to_string(const LayerDesc& layer);

}  // namespace hagcn
