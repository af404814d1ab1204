"""
CTCP Lab - Experiment Dashboard
Run bundled network scenarios and closed-form models from the browser

    streamlit run ctcp_lab.py
"""

import csv
import io
import logging

import streamlit as st

from execution import __version__
from execution.netsim import run_scenario
from execution.reports import SUMMARY_COLUMNS, build_report, csv_text
from execution.run_experiments import MODELS, cmd_model
from execution.scenarios import ScenarioError, build_scenario, bundled_scenarios, read_scenario_file, with_override
from execution.settings import configure_logging

configure_logging()
logger = logging.getLogger(__name__)

# =============================================================================
# PAGE CONFIGURATION
# =============================================================================

st.set_page_config(
    page_title="CTCP Lab",
    page_icon="📡",
    layout="wide",
    initial_sidebar_state="expanded"
)


# =============================================================================
# SESSION STATE INITIALIZATION
# =============================================================================

def init_session_state():
    """Initialize all session state variables."""
    if "reports" not in st.session_state:
        st.session_state.reports = []

    if "runs" not in st.session_state:
        st.session_state.runs = 0


# =============================================================================
# HELPER FUNCTIONS
# =============================================================================

def run_bundled(name: str, seed: int, loss_p: float, duration_s: float):
    """Load a bundled scenario, apply the sidebar overrides and simulate it."""
    path = bundled_scenarios()[name]
    source = str(path)
    data = read_scenario_file(path)
    data = with_override(data, "seed", seed, source)
    data = with_override(data, "duration_s", duration_s, source)
    if loss_p is not None:
        data = with_override(data, "link.loss", {"kind": "iid", "p": loss_p}, source)
    scenario = build_scenario(data, source)
    return build_report(scenario, run_scenario(scenario))


def display_report(report):
    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Efficiency", f"{report.efficiency:.3f}")
    col2.metric("Goodput", f"{report.total_goodput_bps / 1e6:.2f} Mbps")
    col3.metric("Jain index", "-" if report.jain is None else f"{report.jain:.3f}")
    col4.metric("Completion", "-" if report.completion_s is None else f"{report.completion_s:.2f} s")

    st.dataframe(report.summary_rows(), use_container_width=True)
    st.download_button(
        "⬇️ Summary CSV",
        csv_text(report.summary_rows(), SUMMARY_COLUMNS),
        file_name=f"{report.scenario_id}_summary.csv",
        mime="text/csv",
        key=f"download_{st.session_state.runs}"
    )


# =============================================================================
# MAIN APPLICATION
# =============================================================================

def main():
    init_session_state()

    st.title("📡 CTCP Lab")
    st.caption(f"Coded TCP over a simulated bottleneck • v{__version__}")

    scenarios = bundled_scenarios()

    # =========================================================================
    # SIDEBAR
    # =========================================================================

    with st.sidebar:
        st.header("⚙️ Scenario")
        name = st.selectbox("Bundled scenario", list(scenarios))
        default = read_scenario_file(scenarios[name]) if name else {}
        seed = st.number_input("Seed", min_value=0, value=int(default.get("seed", 1)), step=1)
        duration_s = st.number_input(
            "Duration (s)", min_value=0.0, value=float(default.get("duration_s", 30.0)), step=5.0
        )
        override_loss = st.checkbox("Override loss with i.i.d. p", value=False)
        loss_p = st.slider("p", 0.0, 0.5, 0.01, 0.005) if override_loss else None

        st.markdown("---")
        st.metric("Runs this session", st.session_state.runs)
        if st.button("🗑️ Clear results", use_container_width=True):
            st.session_state.reports = []

    tab_sim, tab_model = st.tabs(["Simulate", "Models"])

    with tab_sim:
        if st.button("▶️ Run", type="primary", disabled=not name):
            with st.spinner(f"Simulating {name}..."):
                try:
                    report = run_bundled(name, int(seed), loss_p, float(duration_s))
                    st.session_state.reports.insert(0, report)
                    st.session_state.runs += 1
                    st.success(f"✓ {name} finished")
                except ScenarioError as e:
                    st.error(f"Scenario error: {e}")
                except Exception as e:
                    logger.error(f"Simulation failed: {e}", exc_info=True)
                    st.error(f"Simulation failed: {e}")

        for i, report in enumerate(st.session_state.reports):
            with st.expander(f"{report.scenario_id} (seed {report.seed})", expanded=i == 0):
                display_report(report)

    with tab_model:
        model = st.selectbox("Model", sorted(MODELS))
        grid = st.text_input("Grid", value=MODELS[model][2])
        sets = st.text_input("Fixed parameters (KEY=VALUE, comma separated)", value="")
        try:
            text = cmd_model(model, grid, [s for s in sets.split(",") if s.strip()])
            st.dataframe(list(csv.DictReader(io.StringIO(text))), use_container_width=True)
            st.download_button("⬇️ Model CSV", text, file_name=f"{model}.csv", mime="text/csv")
        except ValueError as e:
            st.error(str(e))


# =============================================================================
# APPLICATION ENTRY POINT
# =============================================================================

if __name__ == "__main__":
    try:
        logger.info("Starting CTCP Lab...")
        main()
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        st.error(
            "Failed to start the lab. Please check:\n\n"
            "1. The scenarios/ directory is present\n"
            "2. .streamlit/secrets.toml values are numbers where expected"
        )
