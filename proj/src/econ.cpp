#include "battkit/econ.hpp"

#include "battkit/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace battkit {

namespace {

// element mass fractions of the cathode material
struct CathodeSplit {
    double li, ni, co, mn;
};

CathodeSplit cathode_split(Chemistry chemistry) {
    constexpr double m_li = 6.941, m_fe = 55.845, m_p = 30.974, m_o = 15.999;
    constexpr double m_ni = 58.693, m_co = 58.933, m_mn = 54.938;
    if (chemistry == Chemistry::LFP) {
        const double m = m_li + m_fe + m_p + 4.0 * m_o;
        return {m_li / m, 0.0, 0.0, 0.0};
    }
    const double m = m_li + 0.8 * m_ni + 0.1 * m_co + 0.1 * m_mn + 2.0 * m_o;
    return {m_li / m, 0.8 * m_ni / m, 0.1 * m_co / m, 0.1 * m_mn / m};
}

// kg of Li2CO3 per kg of recovered lithium
constexpr double kLi2co3PerLi = 73.890 / (2.0 * 6.941);
constexpr double kMmbtuToMj = 1055.06;
constexpr double kKwhToMj = 3.6;

double price_of(const std::map<std::string, double>& prices, const std::string& key) {
    const auto it = prices.find(key);
    if (it == prices.end())
        raise(ErrorCode::MissingPrice, "no price for material '" + key + "'");
    return it->second;
}

std::string cell_price_key(Chemistry c) {
    return c == Chemistry::LFP ? "lfp_cell" : "nmc811_cell";
}
std::string powder_price_key(Chemistry c) {
    return c == Chemistry::LFP ? "lfp_powder" : "nmc811_powder";
}
std::string cell_purchase_key(Chemistry c) {
    return c == Chemistry::LFP ? "defective_cells_lfp" : "defective_cells_nmc811";
}

} // namespace

const char* chemistry_name(Chemistry c) { return c == Chemistry::LFP ? "LFP" : "NMC811"; }

const char* method_name(RecyclingMethod m) {
    switch (m) {
        case RecyclingMethod::RefinedDirect: return "refined_direct";
        case RecyclingMethod::Direct: return "direct";
        case RecyclingMethod::Hydro: return "hydro";
        case RecyclingMethod::Pyro: return "pyro";
    }
    return "unknown";
}

Chemistry chemistry_from_name(const std::string& name) {
    if (name == "LFP" || name == "lfp") return Chemistry::LFP;
    if (name == "NMC811" || name == "nmc811") return Chemistry::NMC811;
    raise(ErrorCode::InvalidConfig, "unknown chemistry '" + name + "'");
}

RecyclingMethod method_from_name(const std::string& name) {
    if (name == "refined_direct") return RecyclingMethod::RefinedDirect;
    if (name == "direct") return RecyclingMethod::Direct;
    if (name == "hydro") return RecyclingMethod::Hydro;
    if (name == "pyro") return RecyclingMethod::Pyro;
    raise(ErrorCode::InvalidConfig, "unknown recycling method '" + name + "'");
}

void EconScenario::validate() const {
    if (soh <= 0.0 || soh > 1.2) raise(ErrorCode::InvalidConfig, "soh out of range");
    for (const auto& [key, p] : consumed_prices)
        if (p < 0.0) raise(ErrorCode::InvalidConfig, "negative price for '" + key + "'");
    for (const auto& [key, p] : recovered_prices)
        if (p < 0.0) raise(ErrorCode::InvalidConfig, "negative price for '" + key + "'");
    const auto check_fractions = [](const std::vector<FeedstockComponent>& table,
                                    const char* what) {
        double sum = 0.0;
        for (const auto& comp : table) {
            if (comp.rate < 0.0 || comp.rate > 1.0)
                raise(ErrorCode::InvalidConfig, "recovery rate out of [0,1] in " +
                                                    std::string(what) + " for " + comp.material);
            sum += comp.weight_fraction;
        }
        if (sum > 1.001)
            raise(ErrorCode::InvalidConfig,
                  std::string(what) + " weight fractions sum to " + std::to_string(sum));
    };
    check_fractions(cell_composition, "cell composition");
    check_fractions(route_feedstock, "route feedstock");
    if (method != RecyclingMethod::RefinedDirect) {
        if (cell_composition.empty() || route_feedstock.empty())
            raise(ErrorCode::IncompleteRoute,
                  std::string(method_name(method)) + " route needs feedstock tables");
    }
}

EconScenario default_scenario(Chemistry chemistry, RecyclingMethod method, double soh) {
    EconScenario s;
    s.chemistry = chemistry;
    s.method = method;
    s.soh = soh;
    const bool lfp = chemistry == Chemistry::LFP;

    // --- prices (consumed), $/kg -------------------------------------------
    s.consumed_prices = {
        {"defective_cells_lfp", 1.81},
        {"defective_cells_nmc811", 5.44},
        {"hydrogen_peroxide", 0.53},
        {"lime", 0.07},
        {"limestone", 0.07},
        {"lithium_carbonate", 27.39},
        {"lithium_hydroxide", 47.30},
        {"li_naph", 1.13},
        {"nitrogen", 0.07},
        {"sand", 0.05},
        {"soda_ash", 0.38},
        {"sodium_hydroxide", 0.49},
        {"sulfuric_acid", 0.03},
    };
    // --- prices (recovered), $/kg ------------------------------------------
    s.recovered_prices = {
        {"aluminum", 2.65},
        {"copper", 9.65},
        {"co_ion", 24.93},
        {"graphite", 1.41},
        {"lfp_powder", 9.75},
        {"lithium_carbonate_crude", 13.70},
        {"mn_ion", 2.47},
        {"ni_ion", 20.02},
        {"nmc811_powder", 31.17},
        {"lfp_cell", 15.64},
        {"nmc811_cell", 32.22},
        {"carbon_black", 0.0}, // recovered but not marketable
    };

    // --- cell composition with preprocessing fates --------------------------
    const auto frac = [&](double f_lfp, double f_nmc) { return lfp ? f_lfp : f_nmc; };
    s.cell_composition = {
        {"cathode", frac(0.457, 0.429), Fate::ToBlackMass, 0.95, ""},
        {"graphite", frac(0.225, 0.291), Fate::ToBlackMass, 0.95, ""},
        {"carbon_black", frac(0.010, 0.009), Fate::ToBlackMass, 0.95, ""},
        {"binder_pvdf", frac(0.010, 0.009), Fate::ToBlackMass, 0.05, ""},
        {"binder_anode", frac(0.005, 0.006), Fate::ToBlackMass, 0.05, ""},
        {"copper", frac(0.096, 0.078), Fate::Recover, 0.90, "copper"},
        {"aluminum", frac(0.059, 0.052), Fate::Recover, 0.90, "aluminum"},
        {"electrolyte_lipf6", frac(0.019, 0.017), Fate::Burn, 1.0, ""},
        {"electrolyte_ec", frac(0.058, 0.054), Fate::Burn, 1.0, ""},
        {"electrolyte_dmc", frac(0.047, 0.043), Fate::Burn, 1.0, ""},
        {"plastic_pp", frac(0.011, 0.008), Fate::Burn, 1.0, ""},
        {"plastic_pe", frac(0.002, 0.002), Fate::Burn, 1.0, ""},
        {"plastic_pet", frac(0.003, 0.003), Fate::Burn, 1.0, ""},
    };

    // --- black-mass composition and route fates -----------------------------
    if (method == RecyclingMethod::Direct) {
        s.cathode_recovery = 0.90;
        s.route_feedstock = {
            {"cathode", frac(0.652, 0.582), Fate::Recover, 0.90, powder_price_key(chemistry)},
            {"graphite", frac(0.322, 0.395), Fate::Recover, 0.90, "graphite"},
            {"carbon_black", frac(0.014, 0.012), Fate::Recover, 0.90, "carbon_black"},
            {"binder_pvdf", frac(0.001, 0.001), Fate::Landfill, 1.0, ""},
            {"binder_anode", frac(0.0003, 0.0004), Fate::Landfill, 1.0, ""},
            {"copper", frac(0.007, 0.006), Fate::Discharge, 1.0, ""},
            {"aluminum", frac(0.004, 0.004), Fate::Discharge, 1.0, ""},
        };
    } else if (method == RecyclingMethod::Hydro) {
        s.element_recovery = {0.95, 0.99, 0.99, 0.99};
        s.route_feedstock = {
            {"cathode", frac(0.652, 0.582), Fate::Recover, 0.95, ""},
            {"graphite", frac(0.322, 0.395), Fate::Recover, 0.90, "graphite"},
            {"carbon_black", frac(0.014, 0.012), Fate::Recover, 0.90, "carbon_black"},
            {"binder_pvdf", frac(0.001, 0.001), Fate::Landfill, 1.0, ""},
            {"binder_anode", frac(0.0003, 0.0004), Fate::Landfill, 1.0, ""},
            {"copper", frac(0.007, 0.006), Fate::Discharge, 1.0, ""},
            {"aluminum", frac(0.004, 0.004), Fate::Discharge, 1.0, ""},
        };
    } else if (method == RecyclingMethod::Pyro) {
        s.element_recovery = {0.85, 0.90, 0.90, 0.90};
        s.route_feedstock = {
            {"cathode", frac(0.652, 0.582), Fate::Recover, 0.85, ""},
            {"graphite", frac(0.322, 0.395), Fate::Burn, 1.0, ""},
            {"carbon_black", frac(0.014, 0.012), Fate::Burn, 1.0, ""},
            {"binder_pvdf", frac(0.001, 0.001), Fate::Burn, 1.0, ""},
            {"binder_anode", frac(0.0003, 0.0004), Fate::Burn, 1.0, ""},
            {"copper", frac(0.007, 0.006), Fate::Discharge, 1.0, ""},
            {"aluminum", frac(0.004, 0.004), Fate::Discharge, 1.0, ""},
        };
    }

    // --- equipment -----------------------------------------------------------
    const std::vector<Equipment> preprocessing = {
        {"hopper", 29.8, 6, 68088},
        {"conveyor", 119.3, 8, 144324},
        {"crusher", 149.1, 6, 72061},
        {"screen_vibrating", 352.0, 6, 390300},
        {"heat_treatment_furnace", 3897.0, 12, 3363972},
        {"cyclone", 149.1, 6, 1749237},
        {"eddy_current_separator", 149.1, 0, 411291},
        {"air_classifier", 149.1, 6, 326822},
        {"gas_treatment", 664.9, 12, 610000},
        {"wheel_loader", 0.0, 20, 183000},
    };
    switch (method) {
        case RecyclingMethod::RefinedDirect:
            s.equipment = {
                {"conveyor", 29.8, 2, 36067},
                {"infusion_machine", 29.8, 24, 8603},
                {"wheel_loader", 0.0, 20, 183000},
            };
            break;
        case RecyclingMethod::Direct:
            s.preprocessing_equipment = preprocessing;
            s.equipment = {
                {"conveyor", 29.8, 2, 36067},
                {"froth_flotation_cell", 29.1, 6, 1116857},
                {"filter_press", 19.5 * 2, 12, 304372},
                {"dryer", 1975.3, 6, 1737927},
                {"ball_mill", 143.4, 6, 274459},
                {"heat_treatment_furnace", 3893.8, 12, 33521387},
                {"water_treatment", 666.4, 12, 610000},
                {"wheel_loader", 0.0, 20, 183000},
            };
            break;
        case RecyclingMethod::Hydro:
            s.preprocessing_equipment = preprocessing;
            s.equipment = {
                {"conveyor", 29.8, 2, 36067},
                {"leaching_tank", 71.6, 12, 1234271},
                {"mixing_tank", 71.6, 6, 1234271},
                {"filter_press", 9.9, 6, 152186},
                {"solvent_extraction_unit", 698.0 * 3, 36, 6279234},
                {"evaporator", 149.1, 6, 879688},
                {"precipitation_tank", 232.7, 12, 2093078},
                {"centrifuge", 149.1, 6, 469813},
                {"dryer", 4591.1, 6, 2248876},
                {"water_treatment", 666.4, 12, 610000},
                {"wheel_loader", 0.0, 20, 183000},
            };
            break;
        case RecyclingMethod::Pyro:
            s.preprocessing_equipment = preprocessing;
            s.equipment = {
                {"hopper", 29.8, 6, 68088},
                {"conveyor", 59.7 * 2, 4, 72134},
                {"smelter", 11722.2, 24, 28946046},
                {"gas_treatment", 666.4, 12, 610000},
                {"granulator", 20.1, 6, 207097},
                {"leaching_tank", 3.6 * 2, 24, 594248},
                {"solvent_extraction_unit", 6.7 * 3, 36, 891372},
                {"filter_press", 8.2, 6, 152186},
                {"precipitation_tank", 8.9, 12, 486111},
                {"centrifuge", 149.1, 6, 469813},
                {"dryer", 96.0, 6, 283778},
                {"water_treatment", 666.4, 12, 610000},
                {"wheel_loader", 0.0, 20, 183000},
            };
            break;
    }

    // --- consumables (kg per kg of cells; operating assumptions) ------------
    switch (method) {
        case RecyclingMethod::RefinedDirect:
            s.li_supplement_material = "li_naph";
            s.li_supplement_base_kg = 0.4944;
            s.li_supplement_slope_kg = 0.4602;
            s.consumables_kg_per_kg = {{"nitrogen", 0.05}};
            s.water_gallons_per_kg = 0.01;
            break;
        case RecyclingMethod::Direct:
            s.li_supplement_material = "lithium_hydroxide";
            s.li_supplement_base_kg = 0.010;
            s.li_supplement_slope_kg = 0.080;
            s.consumables_kg_per_kg = {{"nitrogen", 0.05}, {"sand", 0.02}};
            s.natural_gas_mmbtu_per_kg = 0.0008;
            s.water_gallons_per_kg = 0.20;
            s.wastewater_gallons_per_kg = 0.004;
            break;
        case RecyclingMethod::Hydro:
            s.consumables_kg_per_kg = {{"sulfuric_acid", 0.90},
                                       {"hydrogen_peroxide", 0.08},
                                       {"soda_ash", 0.20},
                                       {"sodium_hydroxide", 0.05},
                                       {"lime", 0.05}};
            s.natural_gas_mmbtu_per_kg = 0.0005;
            s.water_gallons_per_kg = 0.60;
            s.wastewater_gallons_per_kg = 0.010;
            break;
        case RecyclingMethod::Pyro:
            s.consumables_kg_per_kg = {{"limestone", 0.15},
                                       {"sand", 0.10},
                                       {"sulfuric_acid", 0.30},
                                       {"soda_ash", 0.10}};
            s.natural_gas_mmbtu_per_kg = 0.0040;
            s.water_gallons_per_kg = 0.30;
            s.wastewater_gallons_per_kg = 0.006;
            break;
    }

    // --- environmental impact intensities -----------------------------------
    // Editable placeholder table (per kg of material / per MJ of energy);
    // categories: voc co nox pm10 pm2_5 sox bc oc ch4 n2o co2 energy_mj water_gal
    const auto ei = [](std::initializer_list<double> v) { return std::vector<double>(v); };
    s.impact_intensities = {
        {"electricity_mj",
         ei({2e-5, 1e-4, 3e-4, 8e-5, 4e-5, 4e-4, 6e-6, 5e-6, 2e-4, 3e-6, 0.18, 1.0, 0.02})},
        {"natural_gas_mj",
         ei({4e-5, 8e-5, 1e-4, 6e-6, 5e-6, 1e-6, 2e-6, 1e-6, 3e-4, 1e-6, 0.056, 1.0, 0.001})},
        {"li_naph", ei({3e-4, 5e-4, 1e-3, 2e-4, 1e-4, 8e-4, 2e-5, 2e-5, 1e-3, 1e-5, 1.6, 32.0, 1.5})},
        {"lithium_hydroxide",
         ei({6e-4, 2e-3, 6e-3, 1.5e-3, 8e-4, 9e-3, 6e-5, 5e-5, 8e-3, 6e-5, 8.6, 110.0, 9.0})},
        {"sulfuric_acid",
         ei({2e-5, 6e-5, 2e-4, 9e-5, 4e-5, 1.1e-3, 3e-6, 2e-6, 1e-4, 1e-6, 0.09, 1.9, 0.4})},
        {"hydrogen_peroxide",
         ei({2e-4, 3e-4, 9e-4, 1e-4, 8e-5, 6e-4, 8e-6, 6e-6, 1e-3, 6e-6, 1.0, 19.0, 1.2})},
        {"soda_ash", ei({5e-5, 2e-4, 5e-4, 2e-4, 9e-5, 4e-4, 6e-6, 5e-6, 7e-4, 4e-6, 0.5, 9.5, 0.6})},
        {"sodium_hydroxide",
         ei({1e-4, 3e-4, 8e-4, 2e-4, 1e-4, 7e-4, 1e-5, 8e-6, 9e-4, 6e-6, 1.1, 18.0, 1.0})},
        {"lime", ei({2e-5, 2e-4, 3e-4, 3e-4, 1e-4, 2e-4, 4e-6, 3e-6, 2e-4, 2e-6, 0.9, 4.5, 0.1})},
        {"limestone", ei({4e-6, 2e-5, 5e-5, 9e-5, 3e-5, 3e-5, 1e-6, 1e-6, 2e-5, 1e-7, 0.02, 0.5, 0.05})},
        {"nitrogen", ei({5e-6, 2e-5, 6e-5, 8e-6, 5e-6, 5e-5, 1e-6, 1e-6, 4e-5, 1e-7, 0.08, 1.5, 0.02})},
        {"sand", ei({2e-6, 1e-5, 3e-5, 6e-5, 2e-5, 1e-5, 1e-6, 1e-6, 1e-5, 1e-7, 0.01, 0.2, 0.02})},
    };

    // direct process emissions per kg of cells (combustion of organics;
    // graphite burned in the smelter for the pyro route)
    s.process_emissions.assign(kImpactCategories.size(), 0.0);
    const std::size_t kCo2 = 10, kCo = 1, kVoc = 0, kNox = 2, kEnergy = 11;
    if (method != RecyclingMethod::RefinedDirect) {
        double organics = 0.0;
        for (const auto& comp : s.cell_composition)
            if (comp.fate == Fate::Burn) organics += comp.weight_fraction;
        s.process_emissions[kCo2] += 2.3 * organics;
        s.process_emissions[kCo] += 0.004 * organics;
        s.process_emissions[kVoc] += 0.002 * organics;
        s.process_emissions[kNox] += 0.003 * organics;
        s.process_emissions[kEnergy] += 0.0; // recovered as process heat
    }
    if (method == RecyclingMethod::Pyro) {
        double black_mass = 0.0;
        for (const auto& comp : s.cell_composition)
            if (comp.fate == Fate::ToBlackMass) black_mass += comp.weight_fraction * comp.rate;
        double burned_bm = 0.0;
        for (const auto& comp : s.route_feedstock)
            if (comp.fate == Fate::Burn) burned_bm += comp.weight_fraction;
        s.process_emissions[kCo2] += 3.667 * burned_bm * black_mass; // carbon to CO2
        s.process_emissions[kCo] += 0.01 * burned_bm * black_mass;
    }

    s.validate();
    return s;
}

namespace {

double black_mass_fraction(const EconScenario& s) {
    double f = 0.0;
    for (const auto& comp : s.cell_composition)
        if (comp.fate == Fate::ToBlackMass) f += comp.weight_fraction * comp.rate;
    return f;
}

double li_supplement_kg(const EconScenario& s) {
    if (s.li_supplement_material.empty()) return 0.0;
    double deficit = 1.0 - s.soh;
    if (s.method == RecyclingMethod::Direct)
        deficit = s.soh < 0.8 ? 0.8 - s.soh : 0.0; // supplement only below 0.8
    return s.li_supplement_base_kg + s.li_supplement_slope_kg * deficit;
}

} // namespace

UnitProfit unit_profit(const EconScenario& s) {
    s.validate();
    UnitProfit out;
    const CathodeSplit split = cathode_split(s.chemistry);

    // ---------------- revenue ----------------
    if (s.method == RecyclingMethod::RefinedDirect) {
        // lithium replenishment restores the cell; it sells at the full cell
        // price regardless of incoming SOH
        const double v = price_of(s.recovered_prices, cell_price_key(s.chemistry));
        out.revenue_breakdown["restored_cells"] = v;
    } else {
        for (const auto& comp : s.cell_composition) {
            if (comp.fate == Fate::Recover && !comp.product.empty()) {
                const double mass = comp.weight_fraction * comp.rate;
                out.revenue_breakdown[comp.product] +=
                    mass * price_of(s.recovered_prices, comp.product);
            }
        }
        const double bm = black_mass_fraction(s);
        for (const auto& comp : s.route_feedstock) {
            if (comp.fate != Fate::Recover) continue;
            const double mass = bm * comp.weight_fraction;
            if (comp.material == "cathode") {
                if (s.method == RecyclingMethod::Direct) {
                    // restored powder value scales linearly with SOH
                    const double value =
                        price_of(s.recovered_prices, powder_price_key(s.chemistry)) * s.soh;
                    out.revenue_breakdown["cathode_powder"] += mass * comp.rate * value;
                } else {
                    const ElementRecovery& er = s.element_recovery;
                    const double li_mass = mass * split.li * er.li;
                    out.revenue_breakdown["lithium_carbonate_crude"] +=
                        li_mass * kLi2co3PerLi *
                        price_of(s.recovered_prices, "lithium_carbonate_crude");
                    if (split.ni > 0.0)
                        out.revenue_breakdown["ni_ion"] +=
                            mass * split.ni * er.ni * price_of(s.recovered_prices, "ni_ion");
                    if (split.co > 0.0)
                        out.revenue_breakdown["co_ion"] +=
                            mass * split.co * er.co * price_of(s.recovered_prices, "co_ion");
                    if (split.mn > 0.0)
                        out.revenue_breakdown["mn_ion"] +=
                            mass * split.mn * er.mn * price_of(s.recovered_prices, "mn_ion");
                }
            } else if (!comp.product.empty()) {
                out.revenue_breakdown[comp.product] +=
                    mass * comp.rate * price_of(s.recovered_prices, comp.product);
            }
        }
    }

    // ---------------- cost ----------------
    if (s.include_cell_purchase)
        out.cost_breakdown["cell_purchase"] =
            price_of(s.consumed_prices, cell_purchase_key(s.chemistry));

    const double annual_kg = s.throughput_kg_per_year;
    const double hours = s.operating_days_per_year * s.operating_hours_per_day;
    double capital = 0.0, power_kw = 0.0, labor_ph_day = 0.0;
    for (const auto& eq : s.equipment) {
        capital += eq.capital_usd;
        power_kw += eq.power_kw;
        labor_ph_day += eq.labor_person_hours_per_day;
    }
    for (const auto& eq : s.preprocessing_equipment) {
        capital += eq.capital_usd;
        power_kw += eq.power_kw;
        labor_ph_day += eq.labor_person_hours_per_day;
    }
    out.cost_breakdown["equipment"] = capital / s.amortization_years / annual_kg;
    out.cost_breakdown["labor"] =
        labor_ph_day * s.operating_days_per_year * s.costs.labor_usd_per_hour / annual_kg;
    out.cost_breakdown["electricity"] =
        power_kw * hours * s.costs.electricity_usd_per_kwh / annual_kg;
    if (s.natural_gas_mmbtu_per_kg > 0.0)
        out.cost_breakdown["natural_gas"] =
            s.natural_gas_mmbtu_per_kg * s.costs.natural_gas_usd_per_mmbtu;
    if (s.water_gallons_per_kg > 0.0)
        out.cost_breakdown["water"] = s.water_gallons_per_kg * s.costs.water_usd_per_gallon;
    if (s.wastewater_gallons_per_kg > 0.0)
        out.cost_breakdown["wastewater"] =
            s.wastewater_gallons_per_kg * s.costs.wastewater_usd_per_gallon;

    for (const auto& [material, kg] : s.consumables_kg_per_kg)
        out.cost_breakdown["consumable_" + material] += kg * price_of(s.consumed_prices, material);
    const double li_kg = li_supplement_kg(s);
    if (li_kg > 0.0)
        out.cost_breakdown["lithium_supplement"] =
            li_kg * price_of(s.consumed_prices, s.li_supplement_material);

    const MassBalance mb = route_mass_balance(s);
    if (mb.landfilled > 0.0)
        out.cost_breakdown["landfill"] =
            mb.landfilled / 1000.0 * s.costs.landfill_usd_per_ton;

    for (const auto& [key, v] : out.revenue_breakdown) out.revenue_usd_per_kg += v;
    for (const auto& [key, v] : out.cost_breakdown) out.cost_usd_per_kg += v;
    out.profit_usd_per_kg = out.revenue_usd_per_kg - out.cost_usd_per_kg;
    return out;
}

MassBalance route_mass_balance(const EconScenario& s) {
    MassBalance mb;
    if (s.method == RecyclingMethod::RefinedDirect) {
        mb.recovered = 1.0;
        return mb;
    }
    const double bm = black_mass_fraction(s);
    for (const auto& comp : s.cell_composition) {
        const double mass = comp.weight_fraction;
        switch (comp.fate) {
            case Fate::Recover: mb.recovered += mass * comp.rate; break;
            case Fate::Burn: mb.burned += mass * comp.rate; break;
            case Fate::Landfill: mb.landfilled += mass * comp.rate; break;
            case Fate::Discharge: mb.discharged += mass * comp.rate; break;
            case Fate::ToBlackMass: break; // tracked via the route table below
        }
    }
    for (const auto& comp : s.route_feedstock) {
        const double mass = bm * comp.weight_fraction;
        switch (comp.fate) {
            case Fate::Recover: mb.recovered += mass * comp.rate; break;
            case Fate::Burn: mb.burned += mass * comp.rate; break;
            case Fate::Landfill: mb.landfilled += mass * comp.rate; break;
            case Fate::Discharge: mb.discharged += mass * comp.rate; break;
            case Fate::ToBlackMass: break;
        }
    }
    return mb;
}

std::vector<double> environmental_impact(const EconScenario& s) {
    s.validate();
    const std::size_t n_cat = kImpactCategories.size();
    std::vector<double> ei(n_cat, 0.0);

    const auto intensity = [&](const std::string& key) -> const std::vector<double>& {
        const auto it = s.impact_intensities.find(key);
        if (it == s.impact_intensities.end())
            raise(ErrorCode::MissingIntensity, "no impact intensities for '" + key + "'");
        if (it->second.size() != n_cat)
            raise(ErrorCode::MissingIntensity,
                  "intensity vector for '" + key + "' has wrong length");
        return it->second;
    };

    // consumed materials
    std::map<std::string, double> consumed = s.consumables_kg_per_kg;
    const double li_kg = li_supplement_kg(s);
    if (li_kg > 0.0) consumed[s.li_supplement_material] += li_kg;
    for (const auto& [material, kg] : consumed) {
        const auto& row = intensity(material);
        for (std::size_t k = 0; k < n_cat; ++k) ei[k] += kg * row[k];
    }

    // energy
    double power_kw = 0.0;
    for (const auto& eq : s.equipment) power_kw += eq.power_kw;
    for (const auto& eq : s.preprocessing_equipment) power_kw += eq.power_kw;
    const double elec_mj = power_kw * s.operating_days_per_year * s.operating_hours_per_day *
                           kKwhToMj / s.throughput_kg_per_year;
    const double gas_mj = s.natural_gas_mmbtu_per_kg * kMmbtuToMj;
    {
        const auto& row = intensity("electricity_mj");
        for (std::size_t k = 0; k < n_cat; ++k) ei[k] += elec_mj * row[k];
    }
    if (gas_mj > 0.0) {
        const auto& row = intensity("natural_gas_mj");
        for (std::size_t k = 0; k < n_cat; ++k) ei[k] += gas_mj * row[k];
    }

    // direct process emissions
    if (!s.process_emissions.empty()) {
        if (s.process_emissions.size() != n_cat)
            raise(ErrorCode::MissingIntensity, "process emission vector has wrong length");
        for (std::size_t k = 0; k < n_cat; ++k) ei[k] += s.process_emissions[k];
    }
    return ei;
}

std::vector<double> scrap_forecast(const ScrapAnchors& anchors, const std::vector<double>& years) {
    if (anchors.year_a == anchors.year_b)
        raise(ErrorCode::DegenerateAnchors, "anchor years must differ");
    if (anchors.rate_a <= 0.0 || anchors.rate_b <= 0.0)
        raise(ErrorCode::DegenerateAnchors, "anchor rates must be positive");
    const double k =
        std::log(anchors.rate_a / anchors.rate_b) / (anchors.year_b - anchors.year_a);
    std::vector<double> out;
    out.reserve(years.size());
    for (const double year : years)
        out.push_back(anchors.rate_a * std::exp(-k * (year - anchors.year_a)));
    return out;
}

// ---------------------------------------------------------------------------
// TOML-like scenario files: [section], [[table-array]], key = value
// ---------------------------------------------------------------------------

namespace {

std::string fate_name(Fate f) {
    switch (f) {
        case Fate::Recover: return "recover";
        case Fate::ToBlackMass: return "black_mass";
        case Fate::Burn: return "burn";
        case Fate::Landfill: return "landfill";
        case Fate::Discharge: return "discharge";
    }
    return "recover";
}

Fate fate_from_name(const std::string& s) {
    if (s == "recover") return Fate::Recover;
    if (s == "black_mass") return Fate::ToBlackMass;
    if (s == "burn") return Fate::Burn;
    if (s == "landfill") return Fate::Landfill;
    if (s == "discharge") return Fate::Discharge;
    raise(ErrorCode::InvalidConfig, "unknown fate '" + s + "'");
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

void write_component_table(std::ostream& out, const char* name,
                           const std::vector<FeedstockComponent>& table) {
    for (const auto& comp : table) {
        out << "[[" << name << "]]\n";
        out << "material = \"" << comp.material << "\"\n";
        out << "weight_fraction = " << comp.weight_fraction << "\n";
        out << "fate = \"" << fate_name(comp.fate) << "\"\n";
        out << "rate = " << comp.rate << "\n";
        if (!comp.product.empty()) out << "product = \"" << comp.product << "\"\n";
        out << "\n";
    }
}

void write_equipment_table(std::ostream& out, const char* name,
                           const std::vector<Equipment>& table) {
    for (const auto& eq : table) {
        out << "[[" << name << "]]\n";
        out << "name = \"" << eq.name << "\"\n";
        out << "power_kw = " << eq.power_kw << "\n";
        out << "labor_person_hours_per_day = " << eq.labor_person_hours_per_day << "\n";
        out << "capital_usd = " << eq.capital_usd << "\n\n";
    }
}

} // namespace

void write_scenario_toml(const std::string& path, const EconScenario& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out.precision(17);
    out << "# recycling scenario\n";
    out << "chemistry = \"" << chemistry_name(s.chemistry) << "\"\n";
    out << "method = \"" << method_name(s.method) << "\"\n";
    out << "soh = " << s.soh << "\n";
    out << "throughput_kg_per_year = " << s.throughput_kg_per_year << "\n";
    out << "operating_days_per_year = " << s.operating_days_per_year << "\n";
    out << "operating_hours_per_day = " << s.operating_hours_per_day << "\n";
    out << "amortization_years = " << s.amortization_years << "\n";
    out << "include_cell_purchase = " << (s.include_cell_purchase ? "true" : "false") << "\n";
    out << "cathode_recovery = " << s.cathode_recovery << "\n";
    out << "natural_gas_mmbtu_per_kg = " << s.natural_gas_mmbtu_per_kg << "\n";
    out << "water_gallons_per_kg = " << s.water_gallons_per_kg << "\n";
    out << "wastewater_gallons_per_kg = " << s.wastewater_gallons_per_kg << "\n";
    out << "li_supplement_material = \"" << s.li_supplement_material << "\"\n";
    out << "li_supplement_base_kg = " << s.li_supplement_base_kg << "\n";
    out << "li_supplement_slope_kg = " << s.li_supplement_slope_kg << "\n\n";

    out << "[element_recovery]\n";
    out << "li = " << s.element_recovery.li << "\n";
    out << "ni = " << s.element_recovery.ni << "\n";
    out << "co = " << s.element_recovery.co << "\n";
    out << "mn = " << s.element_recovery.mn << "\n\n";

    out << "[costs]\n";
    out << "labor_usd_per_hour = " << s.costs.labor_usd_per_hour << "\n";
    out << "electricity_usd_per_kwh = " << s.costs.electricity_usd_per_kwh << "\n";
    out << "natural_gas_usd_per_mmbtu = " << s.costs.natural_gas_usd_per_mmbtu << "\n";
    out << "water_usd_per_gallon = " << s.costs.water_usd_per_gallon << "\n";
    out << "wastewater_usd_per_gallon = " << s.costs.wastewater_usd_per_gallon << "\n";
    out << "landfill_usd_per_ton = " << s.costs.landfill_usd_per_ton << "\n\n";

    out << "[prices_consumed]\n";
    for (const auto& [key, v] : s.consumed_prices) out << key << " = " << v << "\n";
    out << "\n[prices_recovered]\n";
    for (const auto& [key, v] : s.recovered_prices) out << key << " = " << v << "\n";
    out << "\n[consumables_kg_per_kg]\n";
    for (const auto& [key, v] : s.consumables_kg_per_kg) out << key << " = " << v << "\n";
    out << "\n";

    write_component_table(out, "cell_composition", s.cell_composition);
    write_component_table(out, "route_feedstock", s.route_feedstock);
    write_equipment_table(out, "equipment", s.equipment);
    write_equipment_table(out, "preprocessing_equipment", s.preprocessing_equipment);

    // impact intensities, one section per material with per-category keys
    for (const auto& [material, row] : s.impact_intensities) {
        out << "[impact." << material << "]\n";
        for (std::size_t k = 0; k < kImpactCategories.size(); ++k)
            out << kImpactCategories[k] << " = " << row[k] << "\n";
        out << "\n";
    }
    out << "[process_emissions]\n";
    for (std::size_t k = 0; k < kImpactCategories.size(); ++k)
        out << kImpactCategories[k] << " = "
            << (k < s.process_emissions.size() ? s.process_emissions[k] : 0.0) << "\n";
}

EconScenario read_scenario_toml(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "'");

    EconScenario s;
    s.cell_composition.clear();
    s.route_feedstock.clear();
    s.equipment.clear();
    s.preprocessing_equipment.clear();
    s.consumed_prices.clear();
    s.recovered_prices.clear();
    s.consumables_kg_per_kg.clear();
    s.impact_intensities.clear();
    s.process_emissions.assign(kImpactCategories.size(), 0.0);

    const auto category_index = [](const std::string& name) -> long {
        for (std::size_t k = 0; k < kImpactCategories.size(); ++k)
            if (name == kImpactCategories[k]) return long(k);
        return -1;
    };

    std::string section;
    bool section_is_array = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        if (text.rfind("[[", 0) == 0) {
            section = trim(text.substr(2, text.size() - 4));
            section_is_array = true;
            if (section == "cell_composition") s.cell_composition.emplace_back();
            else if (section == "route_feedstock") s.route_feedstock.emplace_back();
            else if (section == "equipment") s.equipment.emplace_back();
            else if (section == "preprocessing_equipment") s.preprocessing_equipment.emplace_back();
            else raise(ErrorCode::UnknownConfigKey, "unknown table '" + section + "'");
            continue;
        }
        if (text[0] == '[') {
            section = trim(text.substr(1, text.size() - 2));
            section_is_array = false;
            continue;
        }
        const auto eq_pos = text.find('=');
        if (eq_pos == std::string::npos)
            raise(ErrorCode::InvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(text.substr(0, eq_pos));
        std::string value = trim(text.substr(eq_pos + 1));
        const bool quoted = value.size() >= 2 && value.front() == '"' && value.back() == '"';
        if (quoted) value = value.substr(1, value.size() - 2);
        const auto as_number = [&] {
            try {
                return std::stod(value);
            } catch (...) {
                raise(ErrorCode::InvalidConfig,
                      "line " + std::to_string(line_no) + ": bad number '" + value + "'");
            }
        };
        const auto as_bool = [&] { return value == "true"; };

        if (section.empty()) {
            if (key == "chemistry") s.chemistry = chemistry_from_name(value);
            else if (key == "method") s.method = method_from_name(value);
            else if (key == "soh") s.soh = as_number();
            else if (key == "throughput_kg_per_year") s.throughput_kg_per_year = as_number();
            else if (key == "operating_days_per_year") s.operating_days_per_year = as_number();
            else if (key == "operating_hours_per_day") s.operating_hours_per_day = as_number();
            else if (key == "amortization_years") s.amortization_years = as_number();
            else if (key == "include_cell_purchase") s.include_cell_purchase = as_bool();
            else if (key == "cathode_recovery") s.cathode_recovery = as_number();
            else if (key == "natural_gas_mmbtu_per_kg") s.natural_gas_mmbtu_per_kg = as_number();
            else if (key == "water_gallons_per_kg") s.water_gallons_per_kg = as_number();
            else if (key == "wastewater_gallons_per_kg") s.wastewater_gallons_per_kg = as_number();
            else if (key == "li_supplement_material") s.li_supplement_material = value;
            else if (key == "li_supplement_base_kg") s.li_supplement_base_kg = as_number();
            else if (key == "li_supplement_slope_kg") s.li_supplement_slope_kg = as_number();
            else raise(ErrorCode::UnknownConfigKey, "unknown key '" + key + "'");
        } else if (section == "element_recovery") {
            if (key == "li") s.element_recovery.li = as_number();
            else if (key == "ni") s.element_recovery.ni = as_number();
            else if (key == "co") s.element_recovery.co = as_number();
            else if (key == "mn") s.element_recovery.mn = as_number();
            else raise(ErrorCode::UnknownConfigKey, "unknown key '" + key + "'");
        } else if (section == "costs") {
            if (key == "labor_usd_per_hour") s.costs.labor_usd_per_hour = as_number();
            else if (key == "electricity_usd_per_kwh") s.costs.electricity_usd_per_kwh = as_number();
            else if (key == "natural_gas_usd_per_mmbtu")
                s.costs.natural_gas_usd_per_mmbtu = as_number();
            else if (key == "water_usd_per_gallon") s.costs.water_usd_per_gallon = as_number();
            else if (key == "wastewater_usd_per_gallon")
                s.costs.wastewater_usd_per_gallon = as_number();
            else if (key == "landfill_usd_per_ton") s.costs.landfill_usd_per_ton = as_number();
            else raise(ErrorCode::UnknownConfigKey, "unknown key '" + key + "'");
        } else if (section == "prices_consumed") {
            s.consumed_prices[key] = as_number();
        } else if (section == "prices_recovered") {
            s.recovered_prices[key] = as_number();
        } else if (section == "consumables_kg_per_kg") {
            s.consumables_kg_per_kg[key] = as_number();
        } else if (section == "process_emissions") {
            const long idx = category_index(key);
            if (idx < 0) raise(ErrorCode::UnknownConfigKey, "unknown category '" + key + "'");
            s.process_emissions[std::size_t(idx)] = as_number();
        } else if (section.rfind("impact.", 0) == 0) {
            const std::string material = section.substr(7);
            auto& row = s.impact_intensities[material];
            if (row.empty()) row.assign(kImpactCategories.size(), 0.0);
            const long idx = category_index(key);
            if (idx < 0) raise(ErrorCode::UnknownConfigKey, "unknown category '" + key + "'");
            row[std::size_t(idx)] = as_number();
        } else if (section_is_array &&
                   (section == "cell_composition" || section == "route_feedstock")) {
            auto& comp = section == "cell_composition" ? s.cell_composition.back()
                                                       : s.route_feedstock.back();
            if (key == "material") comp.material = value;
            else if (key == "weight_fraction") comp.weight_fraction = as_number();
            else if (key == "fate") comp.fate = fate_from_name(value);
            else if (key == "rate") comp.rate = as_number();
            else if (key == "product") comp.product = value;
            else raise(ErrorCode::UnknownConfigKey, "unknown key '" + key + "'");
        } else if (section_is_array &&
                   (section == "equipment" || section == "preprocessing_equipment")) {
            auto& eq =
                section == "equipment" ? s.equipment.back() : s.preprocessing_equipment.back();
            if (key == "name") eq.name = value;
            else if (key == "power_kw") eq.power_kw = as_number();
            else if (key == "labor_person_hours_per_day")
                eq.labor_person_hours_per_day = as_number();
            else if (key == "capital_usd") eq.capital_usd = as_number();
            else raise(ErrorCode::UnknownConfigKey, "unknown key '" + key + "'");
        } else {
            raise(ErrorCode::UnknownConfigKey, "unknown section '" + section + "'");
        }
    }
    s.validate();
    return s;
}

} // namespace battkit
