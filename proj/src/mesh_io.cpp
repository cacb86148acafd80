#include "crackgen/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace crackgen {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_double(std::string_view tok, double& out) {
    // from_chars for double is missing on some libstdc++ builds; strtod is locale
    // sensitive but the library never changes LC_NUMERIC.
    std::string tmp(tok);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size() && !tmp.empty();
}

bool parse_long(std::string_view tok, long& out) {
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

// Shared tail of both loaders.
TriangleMesh finish_mesh(TriangleMesh mesh, bool have_normals, bool have_uvs, const std::string& file) {
    if (mesh.faces.empty()) throw ValidationError(file + ": mesh has zero faces");
    mesh.fit_face_attributes();
    repair_mesh(mesh);
    if (mesh.faces.empty()) throw ValidationError(file + ": mesh has zero non-degenerate faces");
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (!mesh.vertices[i].allFinite()) throw ValidationError(file + ": vertex " + std::to_string(i) + " is not finite");
    }
    if (have_normals) {
        for (Vec3& n : mesh.normals) {
            const double len = n.norm();
            if (!(len > 0.0) || !n.allFinite()) {
                have_normals = false;
                break;
            }
            n /= len;
        }
    }
    if (!have_normals) mesh.normals = compute_vertex_normals(mesh);
    if (!have_uvs) mesh.uvs = planar_uvs(mesh);
    mesh.validate();
    return mesh;
}

struct ObjCorner {
    long v = 0, vt = 0, vn = 0;  // 1-based after resolution, 0 = absent
};

TriangleMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read mesh file '" + path.string() + "'");
    const std::string file = path.string();

    std::vector<Vec3> pos, nrm;
    std::vector<Vec2> tex;
    struct PendingFace {
        std::vector<ObjCorner> corners;
        std::size_t line;
    };
    std::vector<PendingFace> pending;
    Material material = Material::Generic;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv(line);
        if (const auto hash = sv.find('#'); hash != std::string_view::npos) {
            std::string_view comment = sv.substr(hash + 1);
            const auto toks = split_ws(comment);
            if (toks.size() == 2 && toks[0] == "material:") material = material_from_string(std::string(toks[1]));
            sv = sv.substr(0, hash);
        }
        const auto toks = split_ws(sv);
        if (toks.empty()) continue;
        const std::string_view kw = toks[0];
        auto need_numbers = [&](std::size_t n, double* out) {
            if (toks.size() < n + 1) throw ParseError(file, line_no, "expected " + std::to_string(n) + " numbers after '" + std::string(kw) + "'");
            for (std::size_t i = 0; i < n; ++i) {
                if (!parse_double(toks[i + 1], out[i])) throw ParseError(file, line_no, "invalid number '" + std::string(toks[i + 1]) + "'");
            }
        };
        if (kw == "v") {
            double c[3];
            need_numbers(3, c);
            pos.emplace_back(c[0], c[1], c[2]);
        } else if (kw == "vt") {
            double c[2];
            need_numbers(2, c);
            tex.emplace_back(c[0], c[1]);
        } else if (kw == "vn") {
            double c[3];
            need_numbers(3, c);
            nrm.emplace_back(c[0], c[1], c[2]);
        } else if (kw == "f") {
            if (toks.size() < 4) throw ParseError(file, line_no, "face needs at least 3 vertices");
            PendingFace pf{{}, line_no};
            for (std::size_t i = 1; i < toks.size(); ++i) {
                ObjCorner c;
                long* slots[3] = {&c.v, &c.vt, &c.vn};
                const long counts[3] = {static_cast<long>(pos.size()), static_cast<long>(tex.size()), static_cast<long>(nrm.size())};
                std::string_view t = toks[i];
                for (int k = 0; k < 3 && !t.empty(); ++k) {
                    const std::size_t slash = static_cast<std::size_t>(std::find(t.begin(), t.end(), '/') - t.begin());
                    std::string_view part = t.substr(0, slash);
                    if (!part.empty()) {
                        long idx;
                        if (!parse_long(part, idx) || idx == 0) throw ParseError(file, line_no, "invalid index '" + std::string(toks[i]) + "'");
                        *slots[k] = idx < 0 ? counts[k] + idx + 1 : idx;
                        if (*slots[k] <= 0) throw ParseError(file, line_no, "relative index out of range in '" + std::string(toks[i]) + "'");
                    } else if (k == 0) {
                        throw ParseError(file, line_no, "face corner without vertex index");
                    }
                    if (slash == t.size()) break;
                    t = t.substr(slash + 1);
                }
                pf.corners.push_back(c);
            }
            pending.push_back(std::move(pf));
        }
        // Other statements (o, g, s, usemtl, mtllib, l, p) do not affect geometry.
    }

    bool all_normals = !pending.empty(), all_uvs = !pending.empty(), aligned = true;
    for (const PendingFace& pf : pending) {
        for (const ObjCorner& c : pf.corners) {
            if (c.v > static_cast<long>(pos.size())) {
                throw ParseError(file, pf.line, "vertex index " + std::to_string(c.v) + " out of range (" + std::to_string(pos.size()) + " vertices)");
            }
            if (c.vt > static_cast<long>(tex.size())) throw ParseError(file, pf.line, "texture index " + std::to_string(c.vt) + " out of range");
            if (c.vn > static_cast<long>(nrm.size())) throw ParseError(file, pf.line, "normal index " + std::to_string(c.vn) + " out of range");
            all_normals = all_normals && c.vn != 0;
            all_uvs = all_uvs && c.vt != 0;
            aligned = aligned && (c.vt == 0 || c.vt == c.v) && (c.vn == 0 || c.vn == c.v);
        }
    }

    TriangleMesh mesh;
    mesh.material = material;
    std::vector<std::uint32_t> corner_index;
    if (aligned) {
        // One attribute slot per position: keeps the file's vertex order.
        mesh.vertices = pos;
        if (all_normals) {
            mesh.normals.assign(pos.size(), Vec3::UnitZ());
        }
        if (all_uvs) mesh.uvs.assign(pos.size(), Vec2::Zero());
        for (const PendingFace& pf : pending) {
            for (const ObjCorner& c : pf.corners) {
                if (all_normals) mesh.normals[c.v - 1] = nrm[c.vn - 1];
                if (all_uvs) mesh.uvs[c.v - 1] = tex[c.vt - 1];
            }
        }
    }
    std::map<std::array<long, 3>, std::uint32_t> combo;
    for (const PendingFace& pf : pending) {
        corner_index.clear();
        for (const ObjCorner& c : pf.corners) {
            if (aligned) {
                corner_index.push_back(static_cast<std::uint32_t>(c.v - 1));
                continue;
            }
            const std::array<long, 3> key{c.v, all_uvs ? c.vt : 0, all_normals ? c.vn : 0};
            auto [it, inserted] = combo.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
            if (inserted) {
                mesh.vertices.push_back(pos[c.v - 1]);
                if (all_normals) mesh.normals.push_back(nrm[c.vn - 1]);
                if (all_uvs) mesh.uvs.push_back(tex[c.vt - 1]);
            }
            corner_index.push_back(it->second);
        }
        for (std::size_t k = 1; k + 1 < corner_index.size(); ++k) {
            mesh.faces.push_back({corner_index[0], corner_index[k], corner_index[k + 1]});
        }
    }
    return finish_mesh(std::move(mesh), all_normals, all_uvs, file);
}

// ---- PLY ----

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

PlyType ply_type(const std::string& s, const std::string& file, std::size_t line) {
    if (s == "char" || s == "int8") return PlyType::I8;
    if (s == "uchar" || s == "uint8") return PlyType::U8;
    if (s == "short" || s == "int16") return PlyType::I16;
    if (s == "ushort" || s == "uint16") return PlyType::U16;
    if (s == "int" || s == "int32") return PlyType::I32;
    if (s == "uint" || s == "uint32") return PlyType::U32;
    if (s == "float" || s == "float32") return PlyType::F32;
    if (s == "double" || s == "float64") return PlyType::F64;
    throw ParseError(file, line, "unknown PLY property type '" + s + "'");
}

std::size_t ply_size(PlyType t) {
    switch (t) {
        case PlyType::I8: case PlyType::U8: return 1;
        case PlyType::I16: case PlyType::U16: return 2;
        case PlyType::I32: case PlyType::U32: case PlyType::F32: return 4;
        case PlyType::F64: return 8;
    }
    return 0;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::F32;
    bool is_list = false;
    PlyType count_type = PlyType::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

class PlyReader {
public:
    PlyReader(std::istream& in, bool binary, std::string file, std::size_t line)
        : in_(in), binary_(binary), file_(std::move(file)), line_(line) {}

    void begin_record() {
        if (binary_) return;
        std::string l;
        do {
            if (!std::getline(in_, l)) throw ParseError(file_, line_ + 1, "unexpected end of file");
            ++line_;
        } while (split_ws(l).empty());
        current_ = std::move(l);
        toks_ = split_ws(current_);
        pos_ = 0;
    }

    void end_record() {
        if (!binary_ && pos_ != toks_.size()) throw ParseError(file_, line_, "trailing values in record");
    }

    double read(PlyType t) {
        if (binary_) {
            unsigned char buf[8];
            const std::size_t n = ply_size(t);
            if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) {
                throw ParseError(file_, line_, "unexpected end of binary data");
            }
            switch (t) {
                case PlyType::I8: return static_cast<std::int8_t>(buf[0]);
                case PlyType::U8: return buf[0];
                case PlyType::I16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
                case PlyType::U16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
                case PlyType::I32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
                case PlyType::U32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
                case PlyType::F32: { float v; std::memcpy(&v, buf, 4); return v; }
                case PlyType::F64: { double v; std::memcpy(&v, buf, 8); return v; }
            }
            return 0;
        }
        if (pos_ >= toks_.size()) throw ParseError(file_, line_, "record has too few values");
        double v;
        if (!parse_double(toks_[pos_], v)) throw ParseError(file_, line_, "invalid number '" + std::string(toks_[pos_]) + "'");
        ++pos_;
        return v;
    }

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    bool binary_;
    std::string file_;
    std::size_t line_;
    std::string current_;
    std::vector<std::string_view> toks_;
    std::size_t pos_ = 0;
};

TriangleMesh load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read mesh file '" + path.string() + "'");
    const std::string file = path.string();

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(file, line_no + 1, "unexpected end of PLY header");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };
    next_line();
    if (line != "ply") throw ParseError(file, line_no, "missing 'ply' magic");
    bool binary = false;
    Material material = Material::Generic;
    std::vector<PlyElement> elements;
    for (;;) {
        next_line();
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "end_header") break;
        if (toks[0] == "format") {
            if (toks.size() < 2) throw ParseError(file, line_no, "malformed format line");
            if (toks[1] == "ascii") binary = false;
            else if (toks[1] == "binary_little_endian") binary = true;
            else throw ParseError(file, line_no, "unsupported PLY format '" + std::string(toks[1]) + "'");
        } else if (toks[0] == "comment") {
            if (toks.size() == 3 && toks[1] == "material:") material = material_from_string(std::string(toks[2]));
        } else if (toks[0] == "obj_info") {
        } else if (toks[0] == "element") {
            long count;
            if (toks.size() != 3 || !parse_long(toks[2], count) || count < 0) throw ParseError(file, line_no, "malformed element line");
            elements.push_back({std::string(toks[1]), static_cast<std::size_t>(count), {}});
        } else if (toks[0] == "property") {
            if (elements.empty()) throw ParseError(file, line_no, "property before element");
            PlyProperty p;
            if (toks.size() == 5 && toks[1] == "list") {
                p.is_list = true;
                p.count_type = ply_type(std::string(toks[2]), file, line_no);
                p.type = ply_type(std::string(toks[3]), file, line_no);
                p.name = std::string(toks[4]);
            } else if (toks.size() == 3) {
                p.type = ply_type(std::string(toks[1]), file, line_no);
                p.name = std::string(toks[2]);
            } else {
                throw ParseError(file, line_no, "malformed property line");
            }
            elements.back().props.push_back(p);
        } else {
            throw ParseError(file, line_no, "unknown header keyword '" + std::string(toks[0]) + "'");
        }
    }

    TriangleMesh mesh;
    mesh.material = material;
    bool have_normals = false, have_uvs = false, saw_vertices = false;
    PlyReader reader(in, binary, file, line_no);
    for (const PlyElement& el : elements) {
        int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, iu = -1, iv = -1, ilist = -1;
        for (std::size_t k = 0; k < el.props.size(); ++k) {
            const std::string& n = el.props[k].name;
            const int kk = static_cast<int>(k);
            if (n == "x") ix = kk;
            else if (n == "y") iy = kk;
            else if (n == "z") iz = kk;
            else if (n == "nx") inx = kk;
            else if (n == "ny") iny = kk;
            else if (n == "nz") inz = kk;
            else if (n == "u" || n == "s" || n == "texture_u") iu = kk;
            else if (n == "v" || n == "t" || n == "texture_v") iv = kk;
            else if (el.props[k].is_list && (n == "vertex_indices" || n == "vertex_index")) ilist = kk;
        }
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        if (is_vertex) {
            if (ix < 0 || iy < 0 || iz < 0) throw ParseError(file, reader.line(), "vertex element lacks x/y/z");
            saw_vertices = true;
            have_normals = inx >= 0 && iny >= 0 && inz >= 0;
            have_uvs = iu >= 0 && iv >= 0;
        }
        if (is_face && ilist < 0) throw ParseError(file, reader.line(), "face element lacks vertex_indices");
        std::vector<double> scalars(el.props.size());
        std::vector<long> list;
        for (std::size_t r = 0; r < el.count; ++r) {
            reader.begin_record();
            for (std::size_t k = 0; k < el.props.size(); ++k) {
                const PlyProperty& p = el.props[k];
                if (p.is_list) {
                    const double cnt = reader.read(p.count_type);
                    if (cnt < 0 || cnt != std::floor(cnt)) throw ParseError(file, reader.line(), "invalid list length");
                    list.clear();
                    for (long i = 0; i < static_cast<long>(cnt); ++i) list.push_back(static_cast<long>(reader.read(p.type)));
                } else {
                    scalars[k] = reader.read(p.type);
                }
            }
            reader.end_record();
            if (is_vertex) {
                mesh.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
                if (have_normals) mesh.normals.emplace_back(scalars[inx], scalars[iny], scalars[inz]);
                if (have_uvs) mesh.uvs.emplace_back(scalars[iu], scalars[iv]);
            } else if (is_face) {
                if (!saw_vertices) throw ParseError(file, reader.line(), "face element before vertex element");
                if (list.size() < 3) throw ParseError(file, reader.line(), "face needs at least 3 vertices");
                for (long idx : list) {
                    if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size()) {
                        throw ParseError(file, reader.line(), "vertex index " + std::to_string(idx) + " out of range (" +
                                                                  std::to_string(mesh.vertices.size()) + " vertices)");
                    }
                }
                for (std::size_t k = 1; k + 1 < list.size(); ++k) {
                    mesh.faces.push_back({static_cast<std::uint32_t>(list[0]), static_cast<std::uint32_t>(list[k]),
                                          static_cast<std::uint32_t>(list[k + 1])});
                }
            }
        }
    }
    return finish_mesh(std::move(mesh), have_normals, have_uvs, file);
}

void write_checked(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error("failed writing mesh file '" + path.string() + "'");
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".obj") return load_obj(path);
    if (ext == ".ply") return load_ply(path);
    throw ValidationError("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
    mesh.validate();
    const std::string ext = lower_ext(path);
    if (ext != ".obj" && ext != ".ply") throw ValidationError("unsupported mesh format '" + ext + "'");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write mesh file '" + path.string() + "'");
    const bool has_n = mesh.normals.size() == mesh.vertices.size();
    const bool has_t = mesh.uvs.size() == mesh.vertices.size();
    char buf[160];
    if (ext == ".obj") {
        out << "# material: " << to_string(mesh.material) << "\n";
        for (const Vec3& v : mesh.vertices) {
            std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
            out << buf;
        }
        if (has_t) {
            for (const Vec2& t : mesh.uvs) {
                std::snprintf(buf, sizeof buf, "vt %.17g %.17g\n", t.x(), t.y());
                out << buf;
            }
        }
        if (has_n) {
            for (const Vec3& n : mesh.normals) {
                std::snprintf(buf, sizeof buf, "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
                out << buf;
            }
        }
        for (const Face& f : mesh.faces) {
            out << 'f';
            for (std::uint32_t i : f) {
                const std::uint32_t k = i + 1;
                out << ' ' << k;
                if (has_t || has_n) out << '/';
                if (has_t) out << k;
                if (has_n) out << '/' << k;
            }
            out << '\n';
        }
    } else {
        out << "ply\nformat ascii 1.0\ncomment material: " << to_string(mesh.material) << "\n";
        out << "element vertex " << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
        if (has_n) out << "property double nx\nproperty double ny\nproperty double nz\n";
        if (has_t) out << "property double u\nproperty double v\n";
        out << "element face " << mesh.faces.size() << "\nproperty list uchar uint vertex_indices\nend_header\n";
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const Vec3& v = mesh.vertices[i];
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
            out << buf;
            if (has_n) {
                std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", mesh.normals[i].x(), mesh.normals[i].y(), mesh.normals[i].z());
                out << buf;
            }
            if (has_t) {
                std::snprintf(buf, sizeof buf, " %.17g %.17g", mesh.uvs[i].x(), mesh.uvs[i].y());
                out << buf;
            }
            out << '\n';
        }
        for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    write_checked(out, path);
}

}  // namespace crackgen
