#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace battkit {

enum class Chemistry { LFP, NMC811 };
enum class RecyclingMethod { RefinedDirect, Direct, Hydro, Pyro };

const char* chemistry_name(Chemistry c);
const char* method_name(RecyclingMethod m);
Chemistry chemistry_from_name(const std::string& name);
RecyclingMethod method_from_name(const std::string& name);

enum class Fate { Recover, ToBlackMass, Burn, Landfill, Discharge };

struct FeedstockComponent {
    std::string material;
    double weight_fraction = 0.0; // of the table's basis (cell or black mass)
    Fate fate = Fate::Recover;
    double rate = 0.0;            // recovery / transfer efficiency
    std::string product;          // recovered-price key; empty when not sold
};

struct Equipment {
    std::string name;
    double power_kw = 0.0;
    double labor_person_hours_per_day = 0.0;
    double capital_usd = 0.0;
};

struct EconCosts {
    double labor_usd_per_hour = 4.60;
    double electricity_usd_per_kwh = 0.10;
    double natural_gas_usd_per_mmbtu = 16.11;
    double water_usd_per_gallon = 0.002;
    double wastewater_usd_per_gallon = 13.70;
    double landfill_usd_per_ton = 10.0;
};

// Element recovery rates for the leaching/smelting routes.
struct ElementRecovery {
    double li = 0.0;
    double ni = 0.0;
    double co = 0.0;
    double mn = 0.0;
};

inline constexpr std::array<const char*, 13> kImpactCategories = {
    "voc", "co", "nox", "pm10", "pm2_5", "sox", "bc",
    "oc",  "ch4", "n2o", "co2",  "energy_mj", "water_gal"};

struct EconScenario {
    Chemistry chemistry = Chemistry::LFP;
    RecyclingMethod method = RecyclingMethod::RefinedDirect;
    double soh = 0.95;

    // cell composition with preprocessing fates (conventional routes only)
    std::vector<FeedstockComponent> cell_composition;
    // black-mass composition with route fates (direct / hydro / pyro)
    std::vector<FeedstockComponent> route_feedstock;
    double cathode_recovery = 0.0;       // direct route
    ElementRecovery element_recovery;    // hydro / pyro routes

    std::map<std::string, double> consumed_prices;  // $/kg
    std::map<std::string, double> recovered_prices; // $/kg
    EconCosts costs;
    std::vector<Equipment> equipment;
    std::vector<Equipment> preprocessing_equipment;

    double throughput_kg_per_year = 1e8; // 100,000 t/yr
    double operating_days_per_year = 320.0;
    double operating_hours_per_day = 20.0;
    double amortization_years = 10.0;
    bool include_cell_purchase = true;

    std::map<std::string, double> consumables_kg_per_kg; // per kg of cells
    double natural_gas_mmbtu_per_kg = 0.0;
    double water_gallons_per_kg = 0.0;
    double wastewater_gallons_per_kg = 0.0;

    // lithium supplement for the direct routes: kg per kg of cells
    std::string li_supplement_material;
    double li_supplement_base_kg = 0.0;  // at soh = 1
    double li_supplement_slope_kg = 0.0; // per unit (1 - soh)

    // per material/energy key: one value per kImpactCategories entry
    std::map<std::string, std::vector<double>> impact_intensities;
    std::vector<double> process_emissions; // P_k per kg of cells

    void validate() const;
};

// Bundled defaults reproducing the printed feedstock, price, cost, and
// equipment tables.
EconScenario default_scenario(Chemistry chemistry, RecyclingMethod method, double soh);

struct UnitProfit {
    double revenue_usd_per_kg = 0.0;
    double cost_usd_per_kg = 0.0;
    double profit_usd_per_kg = 0.0;
    std::map<std::string, double> revenue_breakdown;
    std::map<std::string, double> cost_breakdown;
};

UnitProfit unit_profit(const EconScenario& scenario);

struct MassBalance {
    double recovered = 0.0;
    double burned = 0.0;
    double landfilled = 0.0;
    double discharged = 0.0;
};

MassBalance route_mass_balance(const EconScenario& scenario);

// EI_k = sum_i m_i ei_{i,k} + sum_j q_j ei_{j,k} + P_k, per kg of cells.
std::vector<double> environmental_impact(const EconScenario& scenario);

struct ScrapAnchors {
    double year_a = 2023.0;
    double rate_a = 0.0767;
    double year_b = 2030.0;
    double rate_b = 0.0434;
};

// r(t) = r_a * exp(-k (t - t_a)) with k fitted from the two anchors.
std::vector<double> scrap_forecast(const ScrapAnchors& anchors, const std::vector<double>& years);

// TOML-like scenario files.
void write_scenario_toml(const std::string& path, const EconScenario& scenario);
EconScenario read_scenario_toml(const std::string& path);

} // namespace battkit
