#include "crackgen/pipeline.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace crackgen {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(where, "missing key '" + key + "'");
    return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) fail(where, "unknown key '" + key + "'");
    }
}

const json& object_at(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_object()) fail(where + "." + key, "expected an object");
    return v;
}

const json& array_at(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_array()) fail(where + "." + key, "expected an array");
    return v;
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where, "expected a finite number");
    return d;
}

double number_at(const json& obj, const std::string& key, const std::string& where) {
    return as_number(require(obj, key, where), where + "." + key);
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
    return obj.contains(key) ? number_at(obj, key, where) : fallback;
}

int as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    const auto i = v.get<long long>();
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) fail(where, "integer out of range");
    return static_cast<int>(i);
}

std::string string_at(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) fail(where + "." + key, "expected a string");
    return v.get<std::string>();
}

Vec3 as_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) fail(where, "expected [x, y, z]");
    return {as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]"), as_number(v[2], where + "[2]")};
}

ParamRange as_range(const json& v, const std::string& where) {
    if (v.is_number()) {
        const double d = as_number(v, where);
        return {d, d};
    }
    if (!v.is_array() || v.size() != 2) fail(where, "expected [min, max] or a number");
    return {as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]")};
}

CrackParamRanges parse_params(const json& j, const std::string& where, const std::string& owner) {
    if (!j.is_object()) fail(where, "expected an object");
    reject_unknown(j,
                   {"length_fraction", "roughness_low", "roughness_high", "thickness", "depth",
                    "appearance_probability", "spalling_probability"},
                   where);
    CrackParamRanges p;
    if (j.contains("length_fraction")) p.length_fraction = as_range(j["length_fraction"], where + ".length_fraction");
    if (j.contains("roughness_low")) p.roughness_low = as_range(j["roughness_low"], where + ".roughness_low");
    if (j.contains("roughness_high")) p.roughness_high = as_range(j["roughness_high"], where + ".roughness_high");
    p.thickness = as_range(require(j, "thickness", where), where + ".thickness");
    p.depth = as_range(require(j, "depth", where), where + ".depth");
    p.appearance_probability = number_or(j, "appearance_probability", 1.0, where);
    p.spalling_probability = number_or(j, "spalling_probability", 0.0, where);
    p.validate(owner);
    return p;
}

bool safe_name(const std::string& s) {
    if (s.empty() || s == "." || s == "..") return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

BrickGrid parse_brick_grid(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    reject_unknown(j, {"origin", "u_axis", "v_axis", "brick_width", "brick_height", "mortar_width", "extent_u", "extent_v"},
                   where);
    BrickGrid g;
    g.origin = as_vec3(require(j, "origin", where), where + ".origin");
    g.u_axis = as_vec3(require(j, "u_axis", where), where + ".u_axis");
    g.v_axis = as_vec3(require(j, "v_axis", where), where + ".v_axis");
    g.brick_width = number_or(j, "brick_width", g.brick_width, where);
    g.brick_height = number_or(j, "brick_height", g.brick_height, where);
    g.mortar_width = number_or(j, "mortar_width", g.mortar_width, where);
    g.extent_u = number_at(j, "extent_u", where);
    g.extent_v = number_at(j, "extent_v", where);
    try {
        g.validate();
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    return g;
}

ComponentConfig parse_component(const json& j, const std::string& where, const std::filesystem::path& base) {
    if (!j.is_object()) fail(where, "expected an object");
    reject_unknown(j, {"name", "select", "material", "texture", "color", "brick_grid"}, where);
    ComponentConfig c;
    c.name = string_at(j, "name", where);
    if (c.name.empty()) fail(where + ".name", "must not be empty");
    const std::string ctx = where + " ('" + c.name + "')";
    const json& sel = object_at(j, "select", ctx);
    if (sel.contains("box") == sel.contains("faces")) fail(ctx + ".select", "give exactly one of 'box' or 'faces'");
    if (sel.contains("box")) {
        const json& box = sel["box"];
        if (!box.is_object()) fail(ctx + ".select.box", "expected an object");
        AxisBox b{as_vec3(require(box, "min", ctx + ".select.box"), ctx + ".select.box.min"),
                  as_vec3(require(box, "max", ctx + ".select.box"), ctx + ".select.box.max")};
        if (!(b.min.array() < b.max.array()).all()) fail(ctx + ".select.box", "min must be below max on every axis");
        c.selector = b;
    } else {
        const json& faces = sel["faces"];
        if (!faces.is_array() || faces.empty()) fail(ctx + ".select.faces", "expected a non-empty array");
        std::vector<std::uint32_t> list;
        for (std::size_t i = 0; i < faces.size(); ++i) {
            const std::string w = ctx + ".select.faces[" + std::to_string(i) + "]";
            if (!faces[i].is_number_unsigned()) fail(w, "expected a face index");
            const auto v = faces[i].get<std::uint64_t>();
            if (v > std::numeric_limits<std::uint32_t>::max()) fail(w, "face index out of range");
            list.push_back(static_cast<std::uint32_t>(v));
        }
        c.selector = std::move(list);
    }
    if (j.contains("material")) {
        try {
            c.material = material_from_string(string_at(j, "material", ctx));
        } catch (const ValidationError& e) {
            fail(ctx + ".material", e.what());
        }
    }
    if (j.contains("texture") && j.contains("color")) fail(ctx, "give at most one of 'texture' or 'color'");
    if (j.contains("texture")) {
        c.texture = resolve(base, string_at(j, "texture", ctx));
        if (!std::filesystem::is_regular_file(*c.texture)) {
            fail(ctx + ".texture", "file '" + c.texture->string() + "' does not exist");
        }
    }
    if (j.contains("color")) {
        const json& col = j["color"];
        if (!col.is_array() || col.size() != 3) fail(ctx + ".color", "expected [r, g, b]");
        int rgb[3];
        for (int k = 0; k < 3; ++k) {
            rgb[k] = as_int(col[static_cast<std::size_t>(k)], ctx + ".color");
            if (rgb[k] < 0 || rgb[k] > 255) fail(ctx + ".color", "channels must be in [0, 255]");
        }
        c.color = Rgb{static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                      static_cast<std::uint8_t>(rgb[2])};
    }
    if (j.contains("brick_grid")) c.brick_grid = parse_brick_grid(j["brick_grid"], ctx + ".brick_grid");
    return c;
}

FlightConfig parse_flight(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    reject_unknown(j, {"name", "resolution", "fps", "frame_count", "keyframes", "lighting"}, where);
    FlightConfig f;
    f.name = string_at(j, "name", where);
    if (!safe_name(f.name)) fail(where + ".name", "'" + f.name + "' must use only letters, digits, '_', '-', '.'");
    const std::string ctx = where + " ('" + f.name + "')";
    if (j.contains("resolution")) {
        const json& r = j["resolution"];
        if (!r.is_array() || r.size() != 2) fail(ctx + ".resolution", "expected [width, height]");
        f.resolution = {as_int(r[0], ctx + ".resolution[0]"), as_int(r[1], ctx + ".resolution[1]")};
        if (f.resolution.width <= 0 || f.resolution.height <= 0 || f.resolution.width > 16384 ||
            f.resolution.height > 16384) {
            fail(ctx + ".resolution", "width and height must be in [1, 16384]");
        }
    }
    f.path.fps = number_at(j, "fps", ctx);
    f.path.frame_count = as_int(require(j, "frame_count", ctx), ctx + ".frame_count");
    const json& keys = array_at(j, "keyframes", ctx);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::string w = ctx + ".keyframes[" + std::to_string(i) + "]";
        const json& k = keys[i];
        if (!k.is_object()) fail(w, "expected an object");
        reject_unknown(k, {"position", "target", "fov", "time"}, w);
        CameraKeyframe key;
        key.position = as_vec3(require(k, "position", w), w + ".position");
        key.target = as_vec3(require(k, "target", w), w + ".target");
        key.fov_deg = number_or(k, "fov", key.fov_deg, w);
        key.time = number_or(k, "time", 0.0, w);
        f.path.keyframes.push_back(key);
    }
    try {
        f.path.validate();
    } catch (const ValidationError& e) {
        fail(ctx, e.what());
    }
    const json& light = object_at(j, "lighting", ctx);
    const std::string lw = ctx + ".lighting";
    reject_unknown(light, {"latitude", "longitude", "datetime", "ambient", "overcast"}, lw);
    f.lighting.latitude = number_at(light, "latitude", lw);
    f.lighting.longitude = number_at(light, "longitude", lw);
    f.lighting.when = UtcDateTime::parse(string_at(light, "datetime", lw));
    f.lighting.ambient = number_or(light, "ambient", f.lighting.ambient, lw);
    f.lighting.overcast = number_or(light, "overcast", f.lighting.overcast, lw);
    try {
        f.lighting.validate();
    } catch (const ValidationError& e) {
        fail(lw, e.what());
    }
    return f;
}

}  // namespace

SceneConfig parse_scene_text(const std::string& text, const std::filesystem::path& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports a byte offset; convert it to a line number.
        const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
        throw ParseError(source.string(), line, "malformed JSON");
    }
    const std::string top = source.filename().string();
    if (!root.is_object()) fail(top, "top level must be an object");
    reject_unknown(root,
                   {"mesh", "master_seed", "output_dir", "merge_distance", "max_anchor_distance", "levels", "components",
                    "groups", "annotations", "flights", "spalling"},
                   top);
    const std::filesystem::path base = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");

    SceneConfig cfg;
    cfg.source = source;
    cfg.mesh = resolve(base, string_at(root, "mesh", top));
    if (!std::filesystem::is_regular_file(cfg.mesh)) fail(top + ".mesh", "file '" + cfg.mesh.string() + "' does not exist");
    const json& seed = require(root, "master_seed", top);
    if (!seed.is_number_unsigned()) fail(top + ".master_seed", "expected a non-negative integer");
    cfg.master_seed = seed.get<std::uint64_t>();
    cfg.output_dir = resolve(base, string_at(root, "output_dir", top));
    if (root.contains("merge_distance")) {
        cfg.merge_distance = as_int(root["merge_distance"], top + ".merge_distance");
        if (cfg.merge_distance < 0) fail(top + ".merge_distance", "must be >= 0");
    }
    cfg.max_anchor_distance = number_or(root, "max_anchor_distance", cfg.max_anchor_distance, top);
    if (!(cfg.max_anchor_distance >= 0.0)) fail(top + ".max_anchor_distance", "must be >= 0");

    const json& levels = array_at(root, "levels", top);
    if (levels.empty()) fail(top + ".levels", "needs at least one damage level");
    std::set<int> seen_levels;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const int l = as_int(levels[i], top + ".levels[" + std::to_string(i) + "]");
        if (!seen_levels.insert(l).second) fail(top + ".levels", "level " + std::to_string(l) + " listed twice");
        cfg.levels.push_back(l);
    }

    if (root.contains("spalling")) {
        const json& s = root["spalling"];
        const std::string w = top + ".spalling";
        if (!s.is_object()) fail(w, "expected an object");
        reject_unknown(s, {"site_spacing", "radius_min_factor", "radius_max_factor"}, w);
        cfg.spalling.site_spacing = number_or(s, "site_spacing", cfg.spalling.site_spacing, w);
        cfg.spalling.radius_min_factor = number_or(s, "radius_min_factor", cfg.spalling.radius_min_factor, w);
        cfg.spalling.radius_max_factor = number_or(s, "radius_max_factor", cfg.spalling.radius_max_factor, w);
        if (!(cfg.spalling.site_spacing > 0.0)) fail(w + ".site_spacing", "must be > 0");
        if (!(cfg.spalling.radius_min_factor > 0.0 && cfg.spalling.radius_min_factor <= cfg.spalling.radius_max_factor)) {
            fail(w, "radius factors need 0 < radius_min_factor <= radius_max_factor");
        }
    }

    const json& comps = array_at(root, "components", top);
    if (comps.empty()) fail(top + ".components", "needs at least one component");
    std::set<std::string> comp_names;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        ComponentConfig c = parse_component(comps[i], "components[" + std::to_string(i) + "]", base);
        if (!comp_names.insert(c.name).second) fail("components[" + std::to_string(i) + "]", "duplicate name '" + c.name + "'");
        cfg.components.push_back(std::move(c));
    }

    std::set<std::string> group_ids;
    std::set<int> orders;
    if (root.contains("groups")) {
        const json& groups = array_at(root, "groups", top);
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const std::string w = "groups[" + std::to_string(i) + "]";
            const json& g = groups[i];
            if (!g.is_object()) fail(w, "expected an object");
            reject_unknown(g, {"id", "enable_order", "params"}, w);
            AnnotationGroup group;
            group.id = string_at(g, "id", w);
            const std::string ctx = "group '" + group.id + "'";
            if (!group_ids.insert(group.id).second) fail(w, "duplicate group id '" + group.id + "'");
            group.enable_order = as_int(require(g, "enable_order", ctx), ctx + ".enable_order");
            if (!orders.insert(group.enable_order).second) {
                fail(ctx + ".enable_order", "value " + std::to_string(group.enable_order) + " is used by another group");
            }
            group.params = parse_params(require(g, "params", ctx), ctx + ".params", ctx);
            cfg.groups.push_back(std::move(group));
        }
    }

    const json& anns = array_at(root, "annotations", top);
    std::set<std::string> ann_ids;
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const std::string w = "annotations[" + std::to_string(i) + "]";
        const json& a = anns[i];
        if (!a.is_object()) fail(w, "expected an object");
        reject_unknown(a, {"id", "component", "start", "end", "group", "params"}, w);
        AnnotationConfig ann;
        ann.id = string_at(a, "id", w);
        if (ann.id.empty()) fail(w + ".id", "must not be empty");
        const std::string ctx = "annotation '" + ann.id + "'";
        if (!ann_ids.insert(ann.id).second) fail(w, "duplicate annotation id '" + ann.id + "'");
        ann.component = string_at(a, "component", ctx);
        if (!comp_names.count(ann.component)) fail(ctx + ".component", "unknown component '" + ann.component + "'");
        ann.start = as_vec3(require(a, "start", ctx), ctx + ".start");
        ann.end = as_vec3(require(a, "end", ctx), ctx + ".end");
        if ((ann.end - ann.start).norm() <= 0.0) fail(ctx, "start and end coincide");
        if (a.contains("group") == a.contains("params")) fail(ctx, "give exactly one of 'group' or 'params'");
        if (a.contains("group")) {
            ann.group = string_at(a, "group", ctx);
            if (!group_ids.count(*ann.group)) fail(ctx + ".group", "references undefined group '" + *ann.group + "'");
        } else {
            ann.params = parse_params(a["params"], ctx + ".params", ctx);
        }
        cfg.annotations.push_back(std::move(ann));
    }
    if (cfg.annotations.size() > 0xffff) fail(top + ".annotations", "more than 65535 annotations");

    const json& flights = array_at(root, "flights", top);
    if (flights.empty()) fail(top + ".flights", "needs at least one flight");
    std::set<std::string> flight_names;
    for (std::size_t i = 0; i < flights.size(); ++i) {
        FlightConfig f = parse_flight(flights[i], "flights[" + std::to_string(i) + "]");
        if (!flight_names.insert(f.name).second) fail("flights[" + std::to_string(i) + "]", "duplicate name '" + f.name + "'");
        cfg.flights.push_back(std::move(f));
    }
    return cfg;
}

SceneConfig parse_scene(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read scene file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene_text(ss.str(), path);
}

DamageScene prepare_scene(const SceneConfig& config) {
    DamageScene scene;
    scene.mesh = load_mesh(config.mesh);
    scene.groups = config.groups;
    scene.spalling = config.spalling;
    scene.centerline = config.centerline;
    scene.carve = config.carve;
    for (const ComponentConfig& cc : config.components) {
        Component comp;
        try {
            comp = select_component(scene.mesh, cc.selector, cc.name);
        } catch (const ValidationError& e) {
            throw ValidationError("component '" + cc.name + "': " + e.what());
        }
        comp.material = cc.material;
        const Material m = cc.material ? *cc.material : component_material(scene.mesh, comp);
        if (cc.texture) {
            retexture_component(scene.mesh, comp, *cc.texture, m);
        } else if (cc.color) {
            retexture_component(scene.mesh, comp, Texture::solid(*cc.color, cc.name), m);
        } else if (cc.material) {
            for (std::uint32_t f : comp.faces) scene.mesh.face_material[f] = m;
        }
        if (cc.brick_grid) scene.brick_grids.emplace(cc.name, *cc.brick_grid);
        scene.components.push_back(std::move(comp));
    }
    for (const AnnotationConfig& ac : config.annotations) {
        const Component* comp = nullptr;
        for (const Component& c : scene.components) {
            if (c.name == ac.component) comp = &c;
        }
        if (!comp) throw ValidationError("annotation '" + ac.id + "': unknown component '" + ac.component + "'");
        MetaAnnotation ma;
        ma.id = ac.id;
        ma.component = ac.component;
        ma.params = ac.params;
        ma.group = ac.group;
        for (int k = 0; k < 2; ++k) {
            const Vec3& p = k == 0 ? ac.start : ac.end;
            const SurfacePoint sp = project_to_surface(scene.mesh, p, comp->faces);
            if (sp.distance > config.max_anchor_distance) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%.4g m from component '%s' (limit %.4g m)", sp.distance,
                              ac.component.c_str(), config.max_anchor_distance);
                throw ValidationError("annotation '" + ac.id + "'." + (k == 0 ? "start" : "end") + " is " + buf);
            }
            (k == 0 ? ma.start : ma.end) = SurfaceAnchor{sp.face, sp.barycentric};
        }
        scene.annotations.push_back(std::move(ma));
    }
    return scene;
}

}  // namespace crackgen
