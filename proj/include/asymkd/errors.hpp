#pragma once

#include <stdexcept>
#include <string>

namespace asymkd {

/// Invalid configuration or input file; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Zero-norm embedding or similar numerically meaningless input.
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Loss became non-finite during training; maps to CLI exit code 3.
struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(int epoch, int batch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch(epoch),
          batch(batch) {}
    int epoch;
    int batch;
};

}  // namespace asymkd
