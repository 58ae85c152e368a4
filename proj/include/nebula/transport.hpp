#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nebula/netlab.hpp"
#include "nebula/sim.hpp"

// Datagram conduits carrying the wire bytes. Two bindings share the
// interface: the in-process emulator path (media direction through a
// netlab::Link, feedback direction through a plain delay) and real UDP
// sockets. Receivers get the same bytes either way.

namespace nebula::transport {

class Conduit {
 public:
  using Receiver = std::function<void(std::span<const uint8_t>)>;

  virtual ~Conduit() = default;
  virtual void send(std::vector<uint8_t> datagram) = 0;
  void set_receiver(Receiver r) { receiver_ = std::move(r); }

 protected:
  void deliver(std::span<const uint8_t> bytes) {
    if (receiver_) receiver_(bytes);
  }

 private:
  Receiver receiver_;
};

// Shaped direction: token-bucket serialization, queue, loss.
class EmulatedLinkConduit : public Conduit {
 public:
  EmulatedLinkConduit(sim::EventLoop& loop, netlab::Link& link) : loop_(loop), link_(link) {}

  void send(std::vector<uint8_t> datagram) override {
    auto transit = link_.offer(loop_.now(), static_cast<uint32_t>(datagram.size()));
    if (!transit.deliver_at) return;
    loop_.at(*transit.deliver_at,
             [this, d = std::move(datagram)]() { deliver(d); });
  }

 private:
  sim::EventLoop& loop_;
  netlab::Link& link_;
};

// Clean direction: fixed propagation delay, no loss, no rate limit.
class EmulatedDelayConduit : public Conduit {
 public:
  EmulatedDelayConduit(sim::EventLoop& loop, double delay_s) : loop_(loop), delay_s_(delay_s) {}

  void send(std::vector<uint8_t> datagram) override {
    loop_.at(loop_.now() + delay_s_, [this, d = std::move(datagram)]() { deliver(d); });
  }

 private:
  sim::EventLoop& loop_;
  double delay_s_;
};

// Real UDP binding. send() writes one datagram to the configured peer;
// poll() drains the socket and dispatches to the receiver. Throws
// std::system_error on socket setup failures.
class UdpConduit : public Conduit {
 public:
  UdpConduit(const std::string& bind_host, uint16_t bind_port, const std::string& peer_host,
             uint16_t peer_port);
  ~UdpConduit() override;

  UdpConduit(const UdpConduit&) = delete;
  UdpConduit& operator=(const UdpConduit&) = delete;

  void send(std::vector<uint8_t> datagram) override;
  int poll(int timeout_ms);  // returns datagrams dispatched
  uint16_t local_port() const { return local_port_; }

 private:
  int fd_ = -1;
  uint16_t local_port_ = 0;
};

}  // namespace nebula::transport
