#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "nervedec/ensemble.hpp"

namespace nervedec::pipeline {

// Debug record format, newline-delimited:
//   t_ns,p1..p5,s1..s5,lag_ns
std::string debug_record(const ensemble::Prediction& p);

class DebugSink {
 public:
  virtual ~DebugSink() = default;
  virtual bool write(const ensemble::Prediction& p) = 0;
};

class FileDebugSink : public DebugSink {
 public:
  explicit FileDebugSink(const std::string& path);
  bool write(const ensemble::Prediction& p) override;

 private:
  std::ofstream out_;
};

// Raw TCP byte-stream sink, standing in for the wireless debug link.
class SocketDebugSink : public DebugSink {
 public:
  // Address "host:port"; failure to connect reports false on writes.
  explicit SocketDebugSink(const std::string& address);
  ~SocketDebugSink() override;
  bool write(const ensemble::Prediction& p) override;
  bool connected() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

}  // namespace nervedec::pipeline
