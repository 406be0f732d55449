#include "voxclick/model/clicks.hpp"

#include <cmath>

namespace voxclick::model {

std::string to_string(ClickLabel label) { return label == ClickLabel::kPositive ? "positive" : "negative"; }

ClickLabel click_label_from_string(const std::string& s) {
  if (s == "positive" || s == "pos" || s == "+") return ClickLabel::kPositive;
  if (s == "negative" || s == "neg" || s == "-") return ClickLabel::kNegative;
  throw InputError("unknown click label '" + s + "'");
}

ClickSet::ClickSet(std::vector<Click> clicks, std::size_t max_clicks) : max_clicks_(max_clicks) {
  for (auto& c : clicks) push(c);
}

void ClickSet::push(Click click) {
  if (full()) {
    throw InputError("click set is full (" + std::to_string(max_clicks_) + " clicks)");
  }
  for (double v : click.position) {
    if (!std::isfinite(v)) throw InputError("click position is not finite");
  }
  clicks_.push_back(click);
}

void ClickSet::pop() {
  if (!clicks_.empty()) clicks_.pop_back();
}

}  // namespace voxclick::model
