#pragma once

#include <array>
#include <map>
#include <queue>
#include <vector>

namespace lta::test {

// Shortest move count by breadth-first search over peg assignments.
inline int bfs_hanoi(int n, int from, int to) {
  auto encode = [&](const std::vector<int>& pegs) {
    int code = 0;
    for (int i = n - 1; i >= 0; --i) code = code * 3 + pegs[std::size_t(i)];
    return code;
  };
  const std::vector<int> start(std::size_t(n), from), goal(std::size_t(n), to);
  std::map<int, int> dist{{encode(start), 0}};
  std::queue<std::vector<int>> q;
  q.push(start);
  while (!q.empty()) {
    const auto s = q.front();
    q.pop();
    const int d = dist[encode(s)];
    if (s == goal) return d;
    std::array<int, 3> top{n, n, n};  // smallest disc on each peg
    for (int i = n - 1; i >= 0; --i) top[std::size_t(s[std::size_t(i)])] = i;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        if (a == b || top[std::size_t(a)] == n || top[std::size_t(a)] > top[std::size_t(b)]) continue;
        auto t = s;
        t[std::size_t(top[std::size_t(a)])] = b;
        if (dist.emplace(encode(t), d + 1).second) q.push(t);
      }
  }
  return -1;
}

}  // namespace lta::test
