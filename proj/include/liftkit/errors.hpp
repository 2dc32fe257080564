#pragma once

#include <stdexcept>
#include <string>

namespace liftkit {

// Invalid configuration, caught before any compute starts. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries the record index when one applies (-1 = header).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long record_index = -1)
        : std::runtime_error(record_index < 0
              ? msg
              : msg + " (record " + std::to_string(record_index) + ")"),
          record(record_index) {}
    long record;
};

// Non-finite value detected inside a compute stage.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& stage_name, const std::string& msg)
        : std::runtime_error("numerical error in " + stage_name + ": " + msg),
          stage(stage_name) {}
    std::string stage;
};

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training loss went non-finite. Carries the last checkpoint written, if any.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, const std::string& last_checkpoint_path)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             (last_checkpoint_path.empty()
                                  ? " (no checkpoint saved)"
                                  : ", last good checkpoint: " + last_checkpoint_path)),
          epoch(epoch), last_checkpoint(last_checkpoint_path) {}
    int epoch;
    std::string last_checkpoint;
};

}  // namespace liftkit
