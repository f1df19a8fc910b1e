// Multi-Match comparison of two hand-written scanpaths.

#include <iostream>

#include "vsearch/vsearch.hpp"

int main() {
  using namespace vsearch;
  Scanpath a{"subject_a", {{512, 384}, {300, 200}, {320, 600}, {800, 620}}, true, 12};
  Scanpath b{"subject_b", {{512, 384}, {280, 240}, {700, 600}}, true, 12};
  const auto s = multimatch(a, b, 1024, 768);
  std::cout << "shape " << s.shape << "\ndirection " << s.direction << "\nlength " << s.length << "\nposition "
            << s.position << "\navg " << s.avg() << "\n";
}
