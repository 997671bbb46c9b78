// Writes the bundled synthetic fixture into a directory.
#include <iostream>

#include "CLI11.hpp"
#include "fvkit/error.hpp"
#include "fvkit/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fvkit-synth: generate the synthetic pipeline fixture"};
  fvkit::synthetic::Options options;
  std::string dir;
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--seed", options.seed)->capture_default_str();
  app.add_option("--dim", options.dim)->capture_default_str();
  app.add_option("--subjects", options.subject_identities_per_demographic, "identities per demographic")
      ->capture_default_str();
  app.add_option("--subject-sigma", options.subject_sigma)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    fvkit::synthetic::write_fixture(fvkit::synthetic::make_fixture(options), dir);
  } catch (const fvkit::Error& e) {
    std::cerr << "fvkit-synth: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
