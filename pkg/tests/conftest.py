import sys

from dcsim.scenario import Scenario, builtin_text, load_scenario_text


def dc(name="DC1", bus="DC", **kw):
    spec = {"name": name, "bus": bus, "pattern": "constant",
            "cpu": {"p_idle_mw": 100.0, "p_full_mw": 300.0, "u0": 1.0},
            "cooling": {"p_mw": 60.0}}
    spec.update(kw)
    return spec


def scenario(dcs=(), events=(), duration_s=2.0, dt_s=1e-3, **kw):
    data = {"schema_version": 1, "duration_s": duration_s, "dt_s": dt_s,
            "dcs": list(dcs), "events": list(events)}
    data.update(kw)
    return Scenario.model_validate(data)


def builtin(name, **overrides):
    scn = load_scenario_text(builtin_text(name), f"{name}.scn")
    return scn.with_overrides(**overrides) if overrides else scn


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
