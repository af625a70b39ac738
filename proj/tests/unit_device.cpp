#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "tram/config.hpp"
#include "tram/device.hpp"

using namespace tram;

namespace {

DeviceSpec two_layer(double na = 1e18, double nd = 1e18) {
  DeviceSpec dev;
  dev.regions = {{"p", 500e-9, DopingType::acceptor, na},
                 {"n", 500e-9, DopingType::donor, nd}};
  return dev;
}

} // namespace

TEST_CASE("device validation rejects bad specs") {
  DeviceSpec dev = two_layer();
  CHECK_NOTHROW(dev.validate());
  dev.regions[0].length_m = 0.0;
  CHECK_THROWS_AS(dev.validate(), ValidationError);

  dev = two_layer();
  dev.area_cm2 = -1.0;
  CHECK_THROWS_AS(dev.validate(), ValidationError);

  dev = two_layer();
  dev.regions.clear();
  CHECK_THROWS_AS(dev.validate(), ValidationError);

  dev = two_layer();
  GateSpec g;
  g.region = 5; // out of range
  dev.gate = g;
  CHECK_THROWS_AS(dev.validate(), ValidationError);
}

TEST_CASE("mesh covers the device with region boundaries on nodes") {
  const DeviceSpec dev = two_layer();
  const Mesh1D mesh = build_mesh(dev, {});
  REQUIRE(mesh.node_count() > 10);
  CHECK(mesh.x_m.front() == doctest::Approx(0.0));
  CHECK(mesh.x_m.back() == doctest::Approx(1000e-9));
  CHECK(std::is_sorted(mesh.x_m.begin(), mesh.x_m.end()));
  for (std::size_t i = 1; i < mesh.node_count(); ++i)
    CHECK(mesh.x_m[i] > mesh.x_m[i - 1]); // strictly increasing
  // one junction, on a node
  REQUIRE(mesh.junction_nodes.size() == 1);
  CHECK(mesh.x_m[mesh.junction_nodes[0]] == doctest::Approx(500e-9));
}

TEST_CASE("mesh refines toward junctions") {
  const DeviceSpec dev = two_layer();
  const Mesh1D mesh = build_mesh(dev, {});
  const std::size_t j = mesh.junction_nodes[0];
  const double h_junction = mesh.x_m[j + 1] - mesh.x_m[j];
  double h_max = 0.0;
  for (std::size_t i = 1; i < mesh.node_count(); ++i)
    h_max = std::max(h_max, mesh.x_m[i] - mesh.x_m[i - 1]);
  CHECK(h_junction <= 1.0e-9 * 1.0001);
  CHECK(h_max > 5.0 * h_junction);
}

TEST_CASE("mesh doping is signed and abrupt") {
  const DeviceSpec dev = two_layer(1e17, 1e19);
  const Mesh1D mesh = build_mesh(dev, {});
  const std::size_t j = mesh.junction_nodes[0];
  CHECK(doping_at(mesh, 0) == doctest::Approx(-1e17));
  CHECK(doping_at(mesh, mesh.node_count() - 1) == doctest::Approx(1e19));
  CHECK(doping_at(mesh, j + 1) == doctest::Approx(1e19));
}

TEST_CASE("gate mask covers exactly the gated region") {
  DeviceSpec dev;
  dev.regions = {{"a", 300e-9, DopingType::acceptor, 1e18},
                 {"n", 300e-9, DopingType::donor, 1e17},
                 {"p", 400e-9, DopingType::acceptor, 1e16},
                 {"k", 300e-9, DopingType::donor, 1e18}};
  GateSpec g;
  g.region = 2; // gates must sit on an acceptor-doped interior body
  dev.gate = g;
  const Mesh1D mesh = build_mesh(dev, {});
  // the gated body spans [600, 1000] nm; masked nodes must lie inside it
  // (region-boundary nodes included)
  bool any = false;
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    if (mesh.gate_mask[i]) {
      any = true;
      CHECK(mesh.x_m[i] >= 600e-9 - 1e-12);
      CHECK(mesh.x_m[i] <= 1000e-9 + 1e-12);
    } else {
      CHECK((mesh.x_m[i] < 600e-9 + 1e-12 || mesh.x_m[i] > 1000e-9 - 1e-12));
    }
  }
  CHECK(any);
}

TEST_CASE("config parse rejects unknown keys") {
  const std::string text = R"({
    "device": { "temperature_K": 300, "area_cm2": 1e-10, "frobnicate": 1,
      "regions": [
        {"name":"p","length_nm":500,"type":"acceptor","concentration_cm3":1e18},
        {"name":"n","length_nm":500,"type":"donor","concentration_cm3":1e18}]}
  })";
  CHECK_THROWS_WITH_AS(parse_config(text),
                       doctest::Contains("frobnicate"), ParseError);
}

TEST_CASE("config parse rejects bad region type") {
  const std::string text = R"({
    "device": { "regions": [
      {"name":"x","length_nm":500,"type":"dopey","concentration_cm3":1e18},
      {"name":"n","length_nm":500,"type":"donor","concentration_cm3":1e18}]}
  })";
  CHECK_THROWS_AS(parse_config(text), ParseError);
}

TEST_CASE("device config round-trips through serialization") {
  SimConfig cfg = load_config_file(SOURCE_DIR "/pnpnn6.cfg");
  const std::string text = serialize_device_config(cfg.device);
  const DeviceSpec again = parse_device_config(text);
  REQUIRE(again.regions.size() == cfg.device.regions.size());
  for (std::size_t i = 0; i < again.regions.size(); ++i) {
    CHECK(again.regions[i].name == cfg.device.regions[i].name);
    CHECK(again.regions[i].length_m ==
          doctest::Approx(cfg.device.regions[i].length_m));
    CHECK(again.regions[i].type == cfg.device.regions[i].type);
    CHECK(again.regions[i].concentration_cm3 ==
          doctest::Approx(cfg.device.regions[i].concentration_cm3));
  }
  REQUIRE(again.gate.has_value());
  CHECK(again.gate->region == cfg.device.gate->region);
  CHECK(again.gate->tox_m == doctest::Approx(cfg.device.gate->tox_m));
  CHECK(again.gate->body_thickness_m ==
        doctest::Approx(cfg.device.gate->body_thickness_m));
  CHECK(again.area_cm2 == doctest::Approx(cfg.device.area_cm2));
}

TEST_CASE("reference configs parse with expected structure") {
  const SimConfig six = load_config_file(SOURCE_DIR "/pnpnn6.cfg");
  CHECK(six.device.regions.size() == 6);
  CHECK(six.device.gate.has_value());
  CHECK(six.material.tau_n_s == doctest::Approx(1e-9));
  const SimConfig four = load_config_file(SOURCE_DIR "/pnpn4.cfg");
  CHECK(four.device.regions.size() == 4);
  CHECK(!four.device.gate.has_value());
}

TEST_CASE("sequence parsing") {
  const std::string text = R"({
    "read_threshold_A": 2e-9,
    "sequence": [
      {"kind":"program","v_anode_V":1.0,"v_gate_V":0.5,
       "t_rise_s":1e-9,"t_flat_s":1e-8,"t_fall_s":1e-9},
      {"kind":"read","v_anode_V":1.2,"t_flat_s":1e-8}
    ]})";
  const SequenceConfig seq = parse_sequence(text);
  REQUIRE(seq.ops.size() == 2);
  CHECK(seq.ops[0].kind == PulseKind::program);
  CHECK(seq.ops[1].kind == PulseKind::read);
  CHECK(seq.read_threshold_A == doctest::Approx(2e-9));
  CHECK_THROWS_AS(parse_sequence("{\"sequence\": [{\"kind\":\"zap\"}]}"),
                  ParseError);
  CHECK_THROWS_AS(parse_sequence("{}"), ParseError);
}
