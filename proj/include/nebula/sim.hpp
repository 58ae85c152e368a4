#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

// Discrete-event scheduler on a virtual clock. Ties are broken by insertion
// order so runs are reproducible.

namespace nebula::sim {

class EventLoop {
 public:
  using Handler = std::function<void()>;

  void at(double t, Handler fn) {
    queue_.push(Event{t, next_seq_++, std::move(fn)});
  }

  double now() const { return now_; }

  void run_until(double t_end) {
    while (!queue_.empty() && queue_.top().t <= t_end) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.t;
      ev.fn();
    }
    now_ = t_end;
  }

 private:
  struct Event {
    double t;
    uint64_t seq;
    Handler fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.t > b.t || (a.t == b.t && a.seq > b.seq);
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

}  // namespace nebula::sim
