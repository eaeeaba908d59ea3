// Minimal end-to-end walkthrough: build a toy world, caption an image with a
// seeded hallucination, and regenerate with the dual-anchor edit active.

#include <iostream>

#include "halo/halo.hpp"

int main() {
  using namespace halo;

  MockWorldOptions opt;
  opt.orthonormal = true;
  opt.caption_threshold = 0.2;
  MockWorld world = make_mock_world(/*seed=*/21, {"dog", "cat", "sofa", "car", "bird", "cup"},
                                    /*noise_std=*/0.0, /*hallucination_rate=*/1.0, opt);
  MockBackend backend(world);

  MockScene scene;
  scene.objects = {"dog", "cat"};
  ImageRef image{"demo-image", "", scene};

  EditConfig cfg;
  cfg.alpha = 1.0;  // mock-scale coefficients; hosted models sit nearer 0.1
  cfg.beta = 1.0;
  cfg.layer = 3;
  cfg.num_layers = world.num_layers;
  cfg.strategy = CoefficientStrategy::fixed(1.0);

  MitigationResult result =
      generate_with_mitigation(image, default_caption_prompt(), cfg, backend);

  std::cout << "scene:     dog, cat\n";
  std::cout << "baseline:  " << result.baseline.text << "\n";
  std::cout << "mitigated: " << result.mitigated.text << "\n";
  std::cout << "(edit: +" << result.alpha_used << " f(I)  -" << result.beta_used
            << " f(I'), layer " << cfg.layer << ")\n";
  return 0;
}
