#pragma once

#include <string>
#include <vector>

#include "mript/metrics.hpp"

namespace fixture {

/// Reported MR-IPT results on the fastMRI test sets, used only to pin the
/// Markdown layout.
inline std::vector<mript::metrics::ImageResult> table_rows() {
  using R = mript::metrics::ImageResult;
  return {
      R{"knee", "random", 4, "MR-IPT-type", 34.47, 0.8671},
      R{"knee", "random", 8, "MR-IPT-type", 31.38, 0.7942},
      R{"brain", "equispaced", 4, "MR-IPT-type", 42.31, 0.9827},
      R{"brain", "equispaced", 8, "MR-IPT-type", 35.34, 0.9543},
      R{"knee", "random", 4, "MR-IPT-level", 34.52, 0.8681},
      R{"knee", "random", 8, "MR-IPT-level", 31.45, 0.7952},
      R{"brain", "equispaced", 4, "MR-IPT-level", 42.48, 0.9831},
      R{"brain", "equispaced", 8, "MR-IPT-level", 35.53, 0.9557},
      R{"knee", "random", 4, "MR-IPT-split", 34.51, 0.8678},
      R{"knee", "random", 8, "MR-IPT-split", 31.44, 0.7948},
      R{"brain", "equispaced", 4, "MR-IPT-split", 42.06, 0.9827},
      R{"brain", "equispaced", 8, "MR-IPT-split", 35.34, 0.9543},
  };
}

inline const std::string kTableMarkdown =
    "| Model | knee random ACC=4X PSNR [dB] | SSIM | knee random ACC=8X PSNR [dB] | SSIM "
    "| brain equispaced ACC=4X PSNR [dB] | SSIM | brain equispaced ACC=8X PSNR [dB] | SSIM |\n"
    "|---|---:|---:|---:|---:|---:|---:|---:|---:|\n"
    "| MR-IPT-type | 34.47 | 0.8671 | 31.38 | 0.7942 | 42.31 | 0.9827 | 35.34 | 0.9543 |\n"
    "| MR-IPT-level | 34.52 | 0.8681 | 31.45 | 0.7952 | 42.48 | 0.9831 | 35.53 | 0.9557 |\n"
    "| MR-IPT-split | 34.51 | 0.8678 | 31.44 | 0.7948 | 42.06 | 0.9827 | 35.34 | 0.9543 |\n";

}  // namespace fixture
