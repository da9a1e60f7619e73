// Prints the descriptor of one image, one block per line:
//
//   describe_image texture.png [steps]

#include <cstdio>
#include <cstdlib>
#include <exception>

#include "pptex/pptex.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s IMAGE [STEPS]\n", argv[0]);
    return 1;
  }
  try {
    pptex::DescriptorConfig config;
    if (argc > 2) config.solver.steps = std::strtoul(argv[2], nullptr, 10);
    const pptex::ImageField image = pptex::read_image(argv[1]);
    const auto d = pptex::describe(image, config, argv[1]);

    std::printf("%s: %zux%zu, %zu values\n", argv[1], image.width(), image.height(), d.values.size());
    for (const auto& block : pptex::descriptor_layout(config)) {
      std::printf("%s P=%-2d R=%g k=%-3zu", pptex::to_string(block.kind), block.pair.P, block.pair.R, block.frame);
      for (std::size_t i = 0; i < block.size; ++i) std::printf(" %.4f", d.values[block.offset + i]);
      std::printf("\n");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
