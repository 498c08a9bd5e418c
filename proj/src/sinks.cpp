#include "nervedec/sinks.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

namespace nervedec::pipeline {

std::string debug_record(const ensemble::Prediction& p) {
  std::ostringstream os;
  os.precision(9);
  os << p.produced_timestamp_ns;
  for (double v : p.probs) os << "," << v;
  for (bool s : p.states) os << "," << (s ? 1 : 0);
  os << "," << (p.produced_timestamp_ns - p.newest_sample_timestamp_ns) << "\n";
  return os.str();
}

FileDebugSink::FileDebugSink(const std::string& path) : out_(path) {}

bool FileDebugSink::write(const ensemble::Prediction& p) {
  if (!out_.good()) return false;
  out_ << debug_record(p);
  return out_.good();
}

SocketDebugSink::SocketDebugSink(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return;
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) return;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    const int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  freeaddrinfo(res);
}

SocketDebugSink::~SocketDebugSink() {
  if (fd_ >= 0) ::close(fd_);
}

bool SocketDebugSink::write(const ensemble::Prediction& p) {
  if (fd_ < 0) return false;
  const std::string line = debug_record(p);
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      ::close(fd_);
      fd_ = -1;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace nervedec::pipeline
