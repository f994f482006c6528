#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coevo/network_ir.hpp"

namespace coevo::testing {

// Small fluent builder for hand-written layer graphs.
class NetBuilder {
 public:
  explicit NetBuilder(std::vector<std::int64_t> input_shape, bool weight_sharing = false) {
    net_.weight_sharing = weight_sharing;
    net_.layers.push_back({"in", OpKind::input, {{"shape", input_shape}}, {}});
    net_.inputs = {"in"};
  }
  NetBuilder& conv1d(const std::string& id, int filters, int kernel, const std::string& from,
                     const std::string& share = "") {
    return add(id, OpKind::conv1d, conv_attrs(filters, kernel, share), {from});
  }
  NetBuilder& conv2d(const std::string& id, int filters, int kernel, const std::string& from,
                     const std::string& share = "") {
    return add(id, OpKind::conv2d, conv_attrs(filters, kernel, share), {from});
  }
  NetBuilder& dense(const std::string& id, int units, const std::string& from) {
    return add(id, OpKind::dense, {{"units", units}, {"activation", "relu"}, {"initializer", "glorot"}}, {from});
  }
  NetBuilder& lstm(const std::string& id, int units, const std::string& from) {
    return add(id, OpKind::lstm, {{"units", units}, {"activation", "linear"}, {"initializer", "glorot"}}, {from});
  }
  NetBuilder& gru(const std::string& id, int units, const std::string& from) {
    return add(id, OpKind::gru, {{"units", units}, {"activation", "linear"}, {"initializer", "glorot"}}, {from});
  }
  NetBuilder& dropout(const std::string& id, double rate, const std::string& from) {
    return add(id, OpKind::dropout, {{"rate", rate}}, {from});
  }
  NetBuilder& pool(const std::string& id, const std::string& from) {
    return add(id, OpKind::max_pool, nlohmann::json::object(), {from});
  }
  NetBuilder& flatten(const std::string& id, const std::string& from) {
    return add(id, OpKind::flatten, nlohmann::json::object(), {from});
  }
  NetBuilder& concat(const std::string& id, std::vector<std::string> from) {
    return add(id, OpKind::concat_merge, nlohmann::json::object(), std::move(from));
  }
  NetBuilder& output(int units, std::vector<std::string> from) {
    add("out", OpKind::output, {{"units", units}, {"activation", "softmax"}}, std::move(from));
    net_.outputs = {"out"};
    return *this;
  }
  NetBuilder& add(const std::string& id, OpKind op, nlohmann::json attrs, std::vector<std::string> from) {
    net_.layers.push_back({id, op, std::move(attrs), std::move(from)});
    return *this;
  }
  NetworkGraph build() const { return net_; }

 private:
  static nlohmann::json conv_attrs(int filters, int kernel, const std::string& share) {
    nlohmann::json a = {{"filters", filters}, {"kernel_size", kernel}, {"activation", "relu"}, {"initializer", "he"}};
    if (!share.empty()) a["share_group"] = share;
    return a;
  }

  NetworkGraph net_;
};

struct ParameterFixture {
  std::string name;
  NetworkGraph network;
  std::int64_t expected;  // computed by hand from the per-layer formulas
};

// dense: c*u+u; convNd: k^N*c*f+f; lstm: 4((c+h)h+h); gru: 3((c+h)h+h);
// output: global average pooling then dense.
inline std::vector<ParameterFixture> parameter_fixtures() {
  std::vector<ParameterFixture> f;
  // 4*8+8 + 8*2+2
  f.push_back({"dense chain", NetBuilder({4}).dense("d", 8, "in").output(2, {"d"}).build(), 40 + 18});
  // 3*3*3*16+16 + 16*2+2
  f.push_back({"conv2d 224x224", NetBuilder({224, 224, 3}).conv2d("c", 16, 3, "in").output(2, {"c"}).build(),
               448 + 34});
  // 5*32*64+64 + 64*2+2
  f.push_back({"conv1d", NetBuilder({128, 32}).conv1d("c", 64, 5, "in").output(2, {"c"}).build(), 10304 + 130});
  // 4*((32+64)*64+64) + 64*2+2
  f.push_back({"lstm", NetBuilder({128, 32}).lstm("l", 64, "in").output(2, {"l"}).build(), 24832 + 130});
  // 3*((32+100)*100+100) + 100*2+2
  f.push_back({"gru", NetBuilder({128, 32}).gru("g", 100, "in").output(2, {"g"}).build(), 39900 + 202});
  // 3*32*64+64 + 4*((64+32)*32+32) + 32*2+2
  f.push_back({"conv1d pool lstm dropout",
               NetBuilder({128, 32})
                   .conv1d("c", 64, 3, "in")
                   .pool("p", "c")
                   .lstm("l", 32, "p")
                   .dropout("d", 0.3, "l")
                   .output(2, {"d"})
                   .build(),
               6208 + 12416 + 66});
  // 448 + (3*32+32) + (9*48*8+8) + (8*14+14)
  f.push_back({"branching conv2d",
               NetBuilder({32, 32, 3})
                   .conv2d("a", 16, 3, "in")
                   .conv2d("b", 32, 1, "in")
                   .concat("m", {"a", "b"})
                   .conv2d("c", 8, 3, "m")
                   .output(14, {"c"})
                   .build(),
               448 + 128 + 3464 + 126});
  // (4*4+4) + (64*10+10) + (10*2+2)
  f.push_back({"conv pool flatten dense",
               NetBuilder({8, 8, 4})
                   .conv2d("c", 4, 1, "in")
                   .pool("p", "c")
                   .flatten("f", "p")
                   .dense("d", 10, "f")
                   .output(2, {"d"})
                   .build(),
               20 + 650 + 22});
  // (7*16*8+8) + 3*((16+8)*8+8) + (16*3+3)
  f.push_back({"conv1d and gru branches into the head",
               NetBuilder({50, 16}).conv1d("c", 8, 7, "in").gru("g", 8, "in").output(3, {"c", "g"}).build(),
               904 + 600 + 51});
  // 448 + (9*16*16+16) once for the shared pair + 34
  f.push_back({"shared conv2d blocks",
               NetBuilder({32, 32, 3}, true)
                   .conv2d("a", 16, 3, "in", "g1")
                   .conv2d("b", 16, 3, "a", "g2")
                   .conv2d("c", 16, 3, "b", "g2")
                   .output(2, {"c"})
                   .build(),
               448 + 2320 + 34});
  return f;
}

}  // namespace coevo::testing
