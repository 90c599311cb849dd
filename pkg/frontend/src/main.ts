/**
 * Application shell: base-URL setting, wizard / dashboard tabs, and the
 * dataset-to-dashboard wiring (fetch a manifest, submit its per-record
 * image sets to the diversity endpoint, render the report).
 */

import { StudioClient } from "./api.js";
import { DiversityDashboard } from "./dashboard.js";
import { clear, el } from "./dom.js";
import { SessionWizard } from "./wizard.js";

const DEFAULT_PERCENTILES = [5, 50, 95];

function bootstrap(app: HTMLElement): void {
  const params = new URLSearchParams(window.location.search);
  let client = new StudioClient(params.get("service") ?? "/api");

  const baseInput = el("input", { class: "base-url", type: "text" });
  baseInput.value = client.baseUrl;
  const status = el("span", { class: "health-status" }, "…");
  const applyBase = el("button", { class: "apply-base" }, "Connect");

  const wizardPane = el("div", { class: "pane pane-wizard" });
  const dashboardPane = el("div", { class: "pane pane-dashboard", hidden: "" });

  const checkHealth = () => {
    client
      .health()
      .then((h) => (status.textContent = `service ok (${h.mode} mode)`))
      .catch((err) => (status.textContent = `unreachable: ${err}`));
  };
  applyBase.addEventListener("click", () => {
    client = new StudioClient(baseInput.value.replace(/\/$/, ""));
    checkHealth();
    startWizard();
    startDashboard();
  });

  const tabWizard = el("button", { class: "tab tab-wizard" }, "Session wizard");
  const tabDashboard = el("button", { class: "tab tab-dashboard" }, "Diversity dashboard");
  tabWizard.addEventListener("click", () => {
    wizardPane.hidden = false;
    dashboardPane.hidden = true;
  });
  tabDashboard.addEventListener("click", () => {
    wizardPane.hidden = true;
    dashboardPane.hidden = false;
  });

  function startWizard(): void {
    clear(wizardPane);
    const mount = el("div", { class: "wizard-mount" });
    wizardPane.append(mount);
    new SessionWizard(client, mount).start();
  }

  function startDashboard(): void {
    clear(dashboardPane);
    const datasetInput = el("input", {
      class: "dataset-id",
      type: "text",
      placeholder: "dataset id",
    });
    const load = el("button", { class: "load-dataset" }, "Load diversity report");
    const mount = el("div", { class: "dashboard-mount" });
    load.addEventListener("click", async () => {
      const datasetId = datasetInput.value.trim();
      const dashboard = new DiversityDashboard(mount, {
        blobUrl: (hash) => client.datasetBlobUrl(datasetId, hash),
      });
      try {
        const manifest = await client.datasetManifest(datasetId);
        const setImages = new Map(
          manifest.records
            .filter((record) => record.status === "complete")
            .map((record) => [String(record.index), record.image_blobs ?? []]),
        );
        const report = await client.datasetDiversity(datasetId, DEFAULT_PERCENTILES);
        dashboard.render(report, setImages);
      } catch (err) {
        clear(mount);
        mount.append(el("div", { class: "error-banner" }, String(err)));
      }
    });
    new DiversityDashboard(mount, { blobUrl: (hash) => client.blobUrl(hash) }).render(null);
    dashboardPane.append(el("div", { class: "dashboard-form" }, datasetInput, load), mount);
  }

  app.append(
    el("header", { class: "topbar" }, el("label", {}, "Service: ", baseInput), applyBase, status),
    el("nav", { class: "tabs" }, tabWizard, tabDashboard),
    wizardPane,
    dashboardPane,
  );
  checkHealth();
  startWizard();
  startDashboard();
}

const appRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (appRoot) {
  bootstrap(appRoot);
}
