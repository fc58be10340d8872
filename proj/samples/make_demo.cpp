// Writes a small synthetic sequence (recon, prediction, original, CU layouts and four
// reduced-size weight files) and prints qe command lines that exercise it.
//
//   qe_make_demo <dir> [width height frames]

#include <cstdlib>
#include <iostream>
#include <string>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2 && argc != 5) {
    std::cerr << "usage: " << argv[0] << " <dir> [width height frames]\n";
    return 2;
  }
  qe::synth::SequenceSpec spec;
  if (argc == 5) {
    spec.width = std::atoi(argv[2]);
    spec.height = std::atoi(argv[3]);
    spec.frames = static_cast<std::size_t>(std::atoi(argv[4]));
  }
  try {
    const qe::JobConfig c = qe::synth::write_sequence(argv[1], spec);
    std::string common = " --recon " + c.recon.string() + " --prediction " + c.prediction.string() +
                         " --width " + std::to_string(c.width) + " --height " + std::to_string(c.height) +
                         " --cu-layout '" + c.cu_layout.string() + "' --frame-types " + c.frame_types +
                         " --ctb-size " + std::to_string(c.ctb_size);
    for (const qe::ModelId id : qe::kAllModels) {
      std::string flag = id.name();
      for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
      common += " --weights-" + flag + " " + c.weights[id.index()].string();
    }
    const auto dir = c.output.parent_path();
    std::cout << "qe select" << common << " --original " << c.original.string() << " --signal " << c.signal.string()
              << " --output " << (dir / "selected.yuv").string() << " --report " << c.report.string() << '\n';
    std::cout << "qe apply" << common << " --signal " << c.signal.string() << " --output "
              << (dir / "decoded.yuv").string() << '\n';
  } catch (const qe::Error& e) {
    std::cerr << e.what() << '\n';
    return qe::exit_code(e.kind());
  }
  return 0;
}
