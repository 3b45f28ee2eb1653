#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kvaccel/accel/accel_store.h"
#include "kvaccel/bench/workload.h"
#include "kvaccel/device/bulk_scan.h"

namespace py = pybind11;
using namespace kvaccel;

namespace {

py::dict report_dict(const bench::RunReport& r) {
  py::dict d;
  d["workload"] = r.workload;
  d["policy"] = r.policy;
  d["rollback_mode"] = r.rollback_mode;
  d["seed"] = r.seed;
  d["duration_s"] = r.duration_s;
  d["compaction_workers"] = r.compaction_workers;
  d["writes"] = r.writes;
  d["reads"] = r.reads;
  d["ranges"] = r.ranges;
  d["preload_writes"] = r.preload_writes;
  d["ops_per_s"] = r.ops_per_s;
  d["write_mb_per_s"] = r.write_mb_per_s;
  d["p99_write_us"] = r.p99_write_us;
  d["p99_read_us"] = r.p99_read_us;
  d["p99_range_us"] = r.p99_range_us;
  d["cpu_pct"] = r.cpu_pct;
  d["efficiency"] = r.efficiency;
  d["zero_intervals"] = r.zero_intervals;
  d["stall_intervals"] = r.stall_intervals;
  d["stall_episodes"] = r.stall_episodes;
  d["slowdown_events"] = r.slowdown_events;
  d["blocked_returns"] = r.blocked_returns;
  d["redirected"] = r.redirected;
  d["reads_main"] = r.reads_main;
  d["reads_dev"] = r.reads_dev;
  d["rollbacks"] = r.rollbacks;
  d["rollback_bytes"] = r.rollback_bytes;
  d["rollback_merged"] = r.rollback_merged;
  d["rollback_stale"] = r.rollback_stale;
  d["invariant_violations"] = r.invariant_violations;
  d["main_read_fraction"] = r.main_read_fraction();
  return d;
}

std::vector<bench::MetricsSample> samples_of(const std::string& metrics_csv) {
  return bench::parse_metrics_csv(metrics_csv);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_static("desk", &Config::desk)
      .def_static("keys", &Config::keys)
      .def("set", [](Config& c, const std::string& k, const std::string& v) { c.set(k, v); })
      .def("get", [](const Config& c, const std::string& k) { return c.get(k); })
      .def("load_string", [](Config& c, const std::string& text) { c.load_string(text); })
      .def("dump", &Config::dump)
      .def("validate", &Config::validate);

  py::class_<AccelStore>(m, "Store")
      .def(py::init<const Config&>())
      .def("put",
           [](AccelStore& s, const std::string& k, const std::string& v) {
             auto r = s.put(k, v);
             return py::make_tuple(!r.blocked, r.route == Route::kDev ? "dev" : "main");
           })
      .def("delete",
           [](AccelStore& s, const std::string& k) {
             auto r = s.del(k);
             return py::make_tuple(!r.blocked, r.route == Route::kDev ? "dev" : "main");
           })
      .def("get",
           [](AccelStore& s, const std::string& k) -> py::object {
             auto r = s.get(k);
             if (!r.value) return py::none();
             return py::bytes(*r.value);
           })
      .def("range",
           [](AccelStore& s, const std::string& start, size_t n) {
             py::list out;
             for (auto& kv : s.range(start, n)) out.append(py::make_tuple(py::bytes(kv.key), py::bytes(kv.value)));
             return out;
           })
      .def("advance", &AccelStore::advance, py::arg("us"))
      .def("settle", [](AccelStore& s) { return s.settle(); })
      .def("rollback", &AccelStore::rollback_execute)
      .def("simulate_crash", &AccelStore::simulate_crash)
      .def("recover_metadata", &AccelStore::recover_metadata)
      .def("verdict", [](const AccelStore& s) { return std::string(to_string(s.published().verdict)); })
      .def("now_us", [](const AccelStore& s) { return s.sim().now(); })
      .def("redirected_keys", [](const AccelStore& s) { return s.metadata().size(); })
      .def("counters", [](const AccelStore& s) {
        const auto& c = s.counters();
        py::dict d;
        d["redirected_writes"] = c.redirected_writes;
        d["dev_reads"] = c.dev_reads;
        d["main_reads"] = c.main_reads;
        d["rollbacks_completed"] = c.rollbacks_completed;
        d["rollback_merged"] = c.rollback_merged;
        d["rollback_stale"] = c.rollback_stale;
        return d;
      });

  m.def(
      "run_workload",
      [](const Config& cfg, const std::string& workload) {
        bench::RunResult r;
        {
          py::gil_scoped_release release;
          r = bench::run_workload(cfg, bench::WorkloadSpec::from_name(workload));
        }
        py::dict d;
        d["report"] = report_dict(r.report);
        d["metrics_csv"] = bench::metrics_csv(r.samples);
        d["report_csv"] = bench::report_csv(r.report);
        return d;
      },
      py::arg("config"), py::arg("workload"));

  m.def(
      "utilization_cdf",
      [](const std::string& metrics_csv) {
        std::vector<std::pair<double, double>> out;
        for (auto& p : bench::utilization_cdf(samples_of(metrics_csv))) out.emplace_back(p.utilization, p.fraction);
        return out;
      },
      py::arg("metrics_csv"));

  m.def(
      "pack_chunks",
      [](const std::vector<std::tuple<std::string, std::string, uint64_t>>& entries) {
        device::ChunkWriter w;
        for (auto& [k, v, seq] : entries) w.add(Entry{k, v, seq, false});
        py::list out;
        for (auto& c : w.finish()) {
          out.append(py::make_tuple(py::bytes(reinterpret_cast<const char*>(c.bytes.data()), c.bytes.size()),
                                    c.records));
        }
        return out;
      },
      py::arg("entries"));

  m.def(
      "parse_chunks",
      [](const std::vector<std::pair<std::string, uint32_t>>& raw) {
        std::vector<device::Chunk> chunks;
        for (auto& [b, records] : raw) {
          device::Chunk c;
          c.index = static_cast<uint32_t>(chunks.size());
          c.records = records;
          c.bytes.assign(b.begin(), b.end());
          chunks.push_back(std::move(c));
        }
        py::list out;
        for (auto& e : device::parse_chunks(chunks)) {
          out.append(py::make_tuple(py::bytes(e.key), py::bytes(e.value), e.seq, e.tombstone));
        }
        return out;
      },
      py::arg("chunks"));

  m.attr("CHUNK_BYTES") = device::kChunkBytes;
}
