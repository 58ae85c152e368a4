#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

#include "nebula/transport.hpp"

namespace nebula::transport {

namespace {

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::system_error(EINVAL, std::generic_category(), "bad IPv4 address: " + host);
  return addr;
}

}  // namespace

UdpConduit::UdpConduit(const std::string& bind_host, uint16_t bind_port,
                       const std::string& peer_host, uint16_t peer_port) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");

  sockaddr_in local = make_addr(bind_host, bind_port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&local), sizeof(local)) != 0) {
    const int err = errno;
    ::close(fd_);
    throw std::system_error(err, std::generic_category(), "bind");
  }
  socklen_t len = sizeof(local);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&local), &len) == 0)
    local_port_ = ntohs(local.sin_port);

  sockaddr_in peer = make_addr(peer_host, peer_port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&peer), sizeof(peer)) != 0) {
    const int err = errno;
    ::close(fd_);
    throw std::system_error(err, std::generic_category(), "connect");
  }
}

UdpConduit::~UdpConduit() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpConduit::send(std::vector<uint8_t> datagram) {
  // Best effort, like any datagram: a full socket buffer is just a drop.
  (void)::send(fd_, datagram.data(), datagram.size(), 0);
}

int UdpConduit::poll(int timeout_ms) {
  timeval tv{};
  tv.tv_sec = timeout_ms / 1000;
  tv.tv_usec = (timeout_ms % 1000) * 1000;
  fd_set rfds;
  FD_ZERO(&rfds);
  FD_SET(fd_, &rfds);
  int dispatched = 0;
  while (::select(fd_ + 1, &rfds, nullptr, nullptr, &tv) > 0) {
    uint8_t buf[65536];
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n <= 0) break;
    deliver({buf, static_cast<size_t>(n)});
    ++dispatched;
    tv = {};  // drain what is already queued, then return
    FD_ZERO(&rfds);
    FD_SET(fd_, &rfds);
  }
  return dispatched;
}

}  // namespace nebula::transport
