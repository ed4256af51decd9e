#include "deltak/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deltak/error.hpp"
#include "deltak/version.hpp"

namespace deltak {

using nlohmann::json;

std::string checksum_hex(const DenseMatrix& m) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(bit_checksum(m)));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void atomic_write_text(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

namespace {

json partition_to_json(const ConceptPartition& partition) {
    auto spans_to_json = [](const std::vector<ConceptSpan>& spans) {
        json arr = json::array();
        for (const auto& span : spans)
            arr.push_back({{"concept", span.phrase}, {"indices", span.indices}});
        return arr;
    };
    return {{"present", spans_to_json(partition.present)},
            {"missing", spans_to_json(partition.missing)}};
}

ConceptPartition partition_from_json(const json& j) {
    ConceptPartition partition;
    auto read_spans = [](const json& arr, std::vector<ConceptSpan>& out) {
        for (const auto& item : arr) {
            ConceptSpan span;
            span.phrase = item.at("concept").get<std::string>();
            span.indices = item.at("indices").get<std::vector<int>>();
            out.push_back(std::move(span));
        }
    };
    read_spans(j.at("present"), partition.present);
    read_spans(j.at("missing"), partition.missing);
    return partition;
}

json schedule_to_json(const ScheduleRecord& schedule) {
    json arr = json::array();
    for (const auto& e : schedule.entries) {
        arr.push_back({{"step", e.step},
                       {"alpha", e.alpha_star},
                       {"loss_at_zero", e.loss_at_zero},
                       {"loss_at_optimum", e.loss_at_optimum},
                       {"grad_at_optimum", e.grad_at_optimum},
                       {"iterations", e.iterations_run}});
    }
    return arr;
}

ScheduleRecord schedule_from_json(const json& arr) {
    ScheduleRecord schedule;
    for (const auto& item : arr) {
        ScheduleEntry e;
        e.step = item.at("step").get<std::size_t>();
        e.alpha_star = item.at("alpha").get<double>();
        e.loss_at_zero = item.at("loss_at_zero").get<double>();
        e.loss_at_optimum = item.at("loss_at_optimum").get<double>();
        e.grad_at_optimum = item.at("grad_at_optimum").get<double>();
        e.iterations_run = item.at("iterations").get<std::size_t>();
        schedule.entries.push_back(e);
    }
    return schedule;
}

}  // namespace

void write_trace_file(const std::string& path, const TraceHeader& header,
                      const AttentionTrace& trace, const ScheduleRecord& schedule,
                      const ConceptPartition& partition,
                      const std::string& final_latent_checksum) {
    std::ostringstream out;

    json head;
    head["record"] = "header";
    head["version"] = {{"major", kTraceFormatMajor}, {"minor", kTraceFormatMinor}};
    head["kind"] = header.kind;
    head["config"] = header.config_echo;
    head["prompt"] = header.prompt;
    head["seed"] = header.seed;
    head["tokens"] = header.tokens.surface;
    head["token_ids"] = header.tokens.ids;
    head["steps"] = trace.steps;
    head["layers"] = trace.layers;
    head["heads"] = trace.heads;
    head["queries"] = trace.queries;
    head["keys"] = trace.keys;
    out << head.dump() << '\n';

    for (std::size_t t = 1; t <= trace.steps; ++t) {
        for (std::size_t l = 0; l < trace.layers; ++l) {
            json rec;
            rec["record"] = "attn";
            rec["step"] = t;
            rec["layer"] = l;
            rec["alpha"] = trace.alpha_used[t - 1];
            rec["key_checksum"] =
                trace.key_inputs.empty() ? "" : checksum_hex(trace.key_inputs[t - 1][l]);
            json heads = json::array();
            for (std::size_t h = 0; h < trace.heads; ++h) {
                const DenseMatrix& m = trace.map_at(t, l, h);
                json rows = json::array();
                for (std::size_t q = 0; q < m.rows(); ++q) {
                    json row = json::array();
                    for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(q, k));
                    rows.push_back(std::move(row));
                }
                heads.push_back(std::move(rows));
            }
            rec["maps"] = std::move(heads);
            out << rec.dump() << '\n';
        }
    }

    json foot;
    foot["record"] = "footer";
    foot["schedule"] = schedule_to_json(schedule);
    foot["partition"] = partition_to_json(partition);
    foot["final_latent_checksum"] = final_latent_checksum;
    out << foot.dump() << '\n';

    atomic_write_text(path, out.str());
}

LoadedTrace load_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trace file: " + path);

    LoadedTrace loaded;
    std::string line;
    bool have_header = false, have_footer = false;

    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json rec = json::parse(line);
            const std::string kind = rec.at("record").get<std::string>();
            if (kind == "header") {
                if (have_header) throw IoError("trace: duplicate header");
                have_header = true;
                const int major = rec.at("version").at("major").get<int>();
                if (major != kTraceFormatMajor)
                    throw IoError("trace: unsupported major version " + std::to_string(major));
                loaded.header.version_major = major;
                loaded.header.version_minor = rec.at("version").at("minor").get<int>();
                loaded.header.kind = rec.at("kind").get<std::string>();
                loaded.header.config_echo =
                    rec.at("config").get<std::map<std::string, std::string>>();
                loaded.header.prompt = rec.at("prompt").get<std::string>();
                loaded.header.seed = rec.at("seed").get<std::uint64_t>();
                loaded.header.tokens.surface = rec.at("tokens").get<std::vector<std::string>>();
                loaded.header.tokens.ids = rec.at("token_ids").get<std::vector<std::uint32_t>>();
                AttentionTrace& tr = loaded.trace;
                tr.steps = rec.at("steps").get<std::size_t>();
                tr.layers = rec.at("layers").get<std::size_t>();
                tr.heads = rec.at("heads").get<std::size_t>();
                tr.queries = rec.at("queries").get<std::size_t>();
                tr.keys = rec.at("keys").get<std::size_t>();
                tr.maps.assign(tr.steps, std::vector<std::vector<DenseMatrix>>(tr.layers));
                tr.alpha_used.assign(tr.steps, 0.0);
                loaded.key_checksums.assign(tr.steps, std::vector<std::string>(tr.layers));
            } else if (kind == "attn") {
                if (!have_header) throw IoError("trace: attn record before header");
                const std::size_t step = rec.at("step").get<std::size_t>();
                const std::size_t layer = rec.at("layer").get<std::size_t>();
                AttentionTrace& tr = loaded.trace;
                if (step < 1 || step > tr.steps || layer >= tr.layers)
                    throw IoError("trace: attn record out of range");
                tr.alpha_used[step - 1] = rec.at("alpha").get<double>();
                loaded.key_checksums[step - 1][layer] =
                    rec.at("key_checksum").get<std::string>();
                const json& heads = rec.at("maps");
                if (heads.size() != tr.heads) throw IoError("trace: head count mismatch");
                std::vector<DenseMatrix> head_maps;
                head_maps.reserve(tr.heads);
                for (const auto& rows : heads) {
                    if (rows.size() != tr.queries) throw IoError("trace: query count mismatch");
                    DenseMatrix m(tr.queries, tr.keys);
                    for (std::size_t q = 0; q < tr.queries; ++q) {
                        const auto& row = rows.at(q);
                        if (row.size() != tr.keys) throw IoError("trace: key count mismatch");
                        for (std::size_t k = 0; k < tr.keys; ++k)
                            m(q, k) = row.at(k).get<double>();
                    }
                    head_maps.push_back(std::move(m));
                }
                tr.maps[step - 1][layer] = std::move(head_maps);
            } else if (kind == "footer") {
                if (!have_header) throw IoError("trace: footer before header");
                have_footer = true;
                loaded.schedule = schedule_from_json(rec.at("schedule"));
                loaded.partition = partition_from_json(rec.at("partition"));
                loaded.final_latent_checksum =
                    rec.at("final_latent_checksum").get<std::string>();
            } else {
                throw IoError("trace: unknown record kind \"" + kind + "\"");
            }
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("trace: malformed record: ") + e.what());
    }

    if (!have_header) throw IoError("trace: missing header");
    if (!have_footer) throw IoError("trace: missing footer");
    loaded.trace.validate();
    return loaded;
}

}  // namespace deltak
