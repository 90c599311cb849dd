/**
 * Diversity dashboard: a histogram of per-set pairwise similarity scores
 * with a vertical marker per requested percentile and, below it, one
 * exemplar strip per marker showing that set's candidate images.
 *
 * The dashboard draws exactly what the metrics endpoint returned. Bar
 * heights and marker positions are plotting geometry; every number shown
 * as text (scores, percentiles, bin counts) is a payload value verbatim.
 */

import { clear, el, svgEl } from "./dom.js";
import { formatCount, formatPercentile, formatScore } from "./format.js";
import type { DiversityReport } from "./types.js";

const PLOT_WIDTH = 520;
const PLOT_HEIGHT = 200;
const MARGIN = { top: 16, right: 12, bottom: 24, left: 12 };

export interface DashboardOptions {
  blobUrl(hash: string): string;
}

export class DiversityDashboard {
  constructor(
    private readonly root: HTMLElement,
    private readonly options: DashboardOptions,
  ) {}

  /**
   * Render a diversity report. `setImages` maps set_id to candidate image
   * blob hashes so that exemplar strips can show their images.
   */
  render(report: DiversityReport | null, setImages: Map<string, string[]> = new Map()): void {
    clear(this.root);
    if (!report || report.sets.length === 0) {
      this.root.append(
        el(
          "div",
          { class: "empty-state" },
          "No diversity data yet. Build a dataset or submit image sets to see the score distribution.",
        ),
      );
      return;
    }
    this.root.append(this.renderHistogram(report));
    const detail = el("div", { class: "exemplar-detail-slot" });
    const strips = el("div", { class: "exemplar-strips" });
    for (const exemplar of report.exemplars) {
      strips.append(this.renderStrip(exemplar, setImages, detail));
    }
    this.root.append(strips, detail);
  }

  private renderHistogram(report: DiversityReport): SVGSVGElement {
    const svg = svgEl("svg", {
      class: "diversity-histogram",
      width: String(PLOT_WIDTH),
      height: String(PLOT_HEIGHT),
      viewBox: `0 0 ${PLOT_WIDTH} ${PLOT_HEIGHT}`,
    });
    const { bin_edges: edges, counts } = report.histogram;
    const innerWidth = PLOT_WIDTH - MARGIN.left - MARGIN.right;
    const innerHeight = PLOT_HEIGHT - MARGIN.top - MARGIN.bottom;
    const lo = edges[0];
    const hi = edges[edges.length - 1];
    const xOf = (score: number) => MARGIN.left + ((score - lo) / (hi - lo)) * innerWidth;
    const maxCount = Math.max(...counts, 1);

    counts.forEach((count, i) => {
      const x0 = xOf(edges[i]);
      const x1 = xOf(edges[i + 1]);
      const barHeight = (count / maxCount) * innerHeight;
      const bar = svgEl("rect", {
        class: "hist-bar",
        x: x0.toFixed(1),
        y: (MARGIN.top + innerHeight - barHeight).toFixed(1),
        width: Math.max(x1 - x0 - 1, 0.5).toFixed(1),
        height: barHeight.toFixed(1),
        "data-count": formatCount(count),
      });
      const title = svgEl("title");
      title.textContent = `${formatCount(count)} sets in [${formatScore(edges[i])}, ${formatScore(edges[i + 1])})`;
      bar.append(title);
      svg.append(bar);
    });

    const axis = svgEl("line", {
      class: "hist-axis",
      x1: String(MARGIN.left),
      y1: String(MARGIN.top + innerHeight),
      x2: String(MARGIN.left + innerWidth),
      y2: String(MARGIN.top + innerHeight),
      stroke: "currentColor",
    });
    svg.append(axis);

    for (const exemplar of report.exemplars) {
      const x = xOf(exemplar.score).toFixed(1);
      const marker = svgEl("line", {
        class: "percentile-marker",
        "data-percentile": String(exemplar.percentile),
        "data-set-id": exemplar.set_id,
        x1: x,
        y1: String(MARGIN.top - 8),
        x2: x,
        y2: String(MARGIN.top + innerHeight),
        stroke: "currentColor",
        "stroke-dasharray": "4 2",
      });
      const label = svgEl("text", {
        class: "marker-label",
        x,
        y: String(MARGIN.top - 10),
        "text-anchor": "middle",
      });
      label.textContent = formatPercentile(exemplar.percentile);
      svg.append(marker, label);
    }
    return svg;
  }

  private renderStrip(
    exemplar: DiversityReport["exemplars"][number],
    setImages: Map<string, string[]>,
    detail: HTMLElement,
  ): HTMLElement {
    const blobs = setImages.get(exemplar.set_id) ?? [];
    const strip = el(
      "div",
      { class: "exemplar-strip", "data-set-id": exemplar.set_id },
      el(
        "header",
        { class: "exemplar-header" },
        `${formatPercentile(exemplar.percentile)} · set ${exemplar.set_id} · score `,
        el("span", { class: "exemplar-score" }, formatScore(exemplar.score)),
      ),
    );
    const row = el("div", { class: "exemplar-thumbs" });
    if (blobs.length === 0) {
      row.append(el("span", { class: "no-images" }, "images not available"));
    }
    for (const blob of blobs) {
      row.append(
        el("img", { class: "exemplar-thumb", src: this.options.blobUrl(blob), alt: exemplar.set_id }),
      );
    }
    strip.append(row);
    strip.addEventListener("click", () => {
      clear(detail);
      const panel = el(
        "div",
        { class: "exemplar-detail", "data-set-id": exemplar.set_id },
        el("h4", {}, `Set ${exemplar.set_id} (${formatPercentile(exemplar.percentile)})`),
      );
      for (const blob of blobs) {
        panel.append(
          el("img", { class: "exemplar-full", src: this.options.blobUrl(blob), alt: exemplar.set_id }),
        );
      }
      detail.append(panel);
    });
    return strip;
  }
}
