#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxclick/grid/scene.hpp"

namespace voxclick::model {

enum class ClickLabel : std::uint8_t { kPositive, kNegative };

std::string to_string(ClickLabel label);
ClickLabel click_label_from_string(const std::string& s);

struct Click {
  grid::Vec3 position{0, 0, 0};
  ClickLabel label = ClickLabel::kPositive;
  int ordinal = 0;  // creation order; only the UI/undo path reads it

  bool positive() const { return label == ClickLabel::kPositive; }
};

// Ordered clicks with a hard cap.
class ClickSet {
 public:
  explicit ClickSet(std::size_t max_clicks = 10) : max_clicks_(max_clicks) {}
  ClickSet(std::vector<Click> clicks, std::size_t max_clicks);

  // Throws InputError when full or the position is not finite.
  void push(Click click);
  void pop();

  std::size_t size() const { return clicks_.size(); }
  bool empty() const { return clicks_.empty(); }
  bool full() const { return clicks_.size() >= max_clicks_; }
  std::size_t max_clicks() const { return max_clicks_; }
  const Click& operator[](std::size_t i) const { return clicks_[i]; }
  const std::vector<Click>& clicks() const { return clicks_; }
  auto begin() const { return clicks_.begin(); }
  auto end() const { return clicks_.end(); }

 private:
  std::vector<Click> clicks_;
  std::size_t max_clicks_;
};

}  // namespace voxclick::model
