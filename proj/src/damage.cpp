#include "crackgen/crack.hpp"
#include "crackgen/parallel.hpp"
#include "crackgen/random.hpp"

#include <algorithm>
#include <set>

namespace crackgen {

namespace {

// Stream salts for the per-annotation sub-seeds.
constexpr std::uint64_t kParamStream = 1;
constexpr std::uint64_t kPathStream = 2;
constexpr std::uint64_t kSpallingStream = 3;

const Component& find_component(const DamageScene& scene, const std::string& name) {
    for (const Component& c : scene.components) {
        if (c.name == name) return c;
    }
    throw ValidationError("unknown component '" + name + "'");
}

}  // namespace

const CrackParamRanges& resolve_ranges(const MetaAnnotation& annotation, const std::vector<AnnotationGroup>& groups) {
    if (!annotation.group) return annotation.params;
    for (const AnnotationGroup& g : groups) {
        if (g.id == *annotation.group) return g.params;
    }
    throw ValidationError("annotation '" + annotation.id + "' references unknown group '" + *annotation.group + "'");
}

std::map<std::string, std::uint32_t> assign_crack_ids(const std::vector<MetaAnnotation>& annotations) {
    std::vector<std::string> ids;
    ids.reserve(annotations.size());
    for (const MetaAnnotation& a : annotations) ids.push_back(a.id);
    std::sort(ids.begin(), ids.end());
    std::map<std::string, std::uint32_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!out.emplace(ids[i], static_cast<std::uint32_t>(i + 1)).second) {
            throw ValidationError("duplicate annotation id '" + ids[i] + "'");
        }
    }
    if (ids.size() > 0xffff) throw ValidationError("more than 65535 annotations");
    return out;
}

bool annotation_active(const MetaAnnotation& annotation, const std::vector<AnnotationGroup>& groups, int level) {
    if (!annotation.group) return true;
    for (const AnnotationGroup& g : groups) {
        if (g.id == *annotation.group) return g.enable_order <= level;
    }
    throw ValidationError("annotation '" + annotation.id + "' references unknown group '" + *annotation.group + "'");
}

std::optional<CrackInstance> generate_instance(const DamageScene& scene, const MetaAnnotation& annotation,
                                               std::uint32_t crack_id, std::uint64_t master_seed) {
    const std::uint64_t seed = annotation_seed(master_seed, annotation.id);
    const CrackParamRanges& ranges = resolve_ranges(annotation, scene.groups);
    const SampledParameters params = sample_parameters(ranges, derive_seed(seed, kParamStream));
    if (!params.appears) return std::nullopt;

    const Component& comp = find_component(scene, annotation.component);
    CrackInstance inst;
    inst.annotation_id = annotation.id;
    inst.crack_id = crack_id;
    inst.seed = seed;
    inst.params = params;
    inst.material = component_material(scene.mesh, comp);
    inst.centerline =
        generate_centerline(scene.mesh, comp, annotation, params, derive_seed(seed, kPathStream), scene.centerline);
    if (inst.material == Material::Masonry) {
        const auto it = scene.brick_grids.find(comp.name);
        const BrickGrid grid = it != scene.brick_grids.end() ? it->second : default_brick_grid(scene.mesh, comp);
        inst.centerline = snap_to_masonry(inst.centerline, grid);
    }
    inst.normals.reserve(inst.centerline.size());
    for (const Vec3& p : inst.centerline) {
        inst.normals.push_back(surface_normal(scene.mesh, project_to_surface(scene.mesh, p, comp.faces)));
    }
    CrackProfile prof = build_profile(inst.centerline, params);
    inst.width = std::move(prof.width);
    inst.depth = std::move(prof.depth);
    generate_spalling(inst, derive_seed(seed, kSpallingStream), ranges.spalling_probability, scene.spalling);
    return inst;
}

DamageState generate_damage_state(const DamageScene& scene, int level, std::uint64_t master_seed, unsigned threads) {
    std::set<int> orders;
    for (const AnnotationGroup& g : scene.groups) {
        if (!orders.insert(g.enable_order).second) {
            throw ValidationError("group '" + g.id + "' repeats enable order " + std::to_string(g.enable_order));
        }
    }
    const auto ids = assign_crack_ids(scene.annotations);

    std::vector<const MetaAnnotation*> active;
    for (const MetaAnnotation& a : scene.annotations) {
        if (annotation_active(a, scene.groups, level)) active.push_back(&a);
    }
    std::sort(active.begin(), active.end(), [](const MetaAnnotation* x, const MetaAnnotation* y) { return x->id < y->id; });

    std::vector<std::optional<CrackInstance>> generated(active.size());
    parallel_for(active.size(), threads, [&](std::size_t i) {
        generated[i] = generate_instance(scene, *active[i], ids.at(active[i]->id), master_seed);
    });

    DamageState state;
    state.mesh = scene.mesh;
    for (auto& inst : generated) {
        if (!inst) continue;
        CarveResult carved = carve_crack(state.mesh, *inst, scene.carve);
        if (carved.skipped) {
            state.skipped.push_back(inst->annotation_id);
        } else {
            state.mesh = std::move(carved.mesh);
        }
        state.instances.push_back(std::move(*inst));
    }
    return state;
}

}  // namespace crackgen
