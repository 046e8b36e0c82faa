/** Control panel: model upload, per-component sliders (+-3 sigma), random /
 * reset buttons, observation staging controls, posterior / undo / export,
 * and toast-style notices. Plain DOM, organized in folder-like sections. */

import type { ExplorerState } from "./state.js";
import { BusyError } from "./state.js";
import { ApiError } from "./api.js";

export class ControlPanel {
  private sliders: HTMLInputElement[] = [];
  private sliderLabels: HTMLSpanElement[] = [];
  private sections: Record<string, HTMLElement> = {};

  constructor(
    private readonly root: HTMLElement,
    private readonly state: ExplorerState,
  ) {
    this.build();
    state.onChange((event) => {
      if (event === "session") this.rebuildSliders();
      if (event === "alpha") this.syncSliders();
      if (event === "observations" || event === "session") this.renderObservations();
      if (event === "staged") this.syncStagedButtons();
      if (event === "selection") this.syncSelection();
      if (event === "busy") this.syncBusy();
      if (event === "notice" && state.lastNotice) this.toast(state.lastNotice);
    });
  }

  private section(title: string): HTMLElement {
    const wrap = document.createElement("details");
    wrap.open = true;
    const summary = document.createElement("summary");
    summary.textContent = title;
    wrap.append(summary);
    const body = document.createElement("div");
    body.className = "section-body";
    wrap.append(body);
    this.root.append(wrap);
    this.sections[title] = body;
    return body;
  }

  private button(parent: HTMLElement, label: string, onClick: () => void): HTMLButtonElement {
    const el = document.createElement("button");
    el.textContent = label;
    el.addEventListener("click", () => void this.guard(onClick));
    parent.append(el);
    return el;
  }

  private async guard(action: () => void | Promise<unknown>): Promise<void> {
    try {
      await action();
    } catch (err) {
      if (err instanceof BusyError) {
        this.toast("still working on the previous request");
      } else if (err instanceof ApiError) {
        const extra = err.violations.length ? `\n${err.violations.join("\n")}` : "";
        this.toast(`service error ${err.status}: ${err.message}${extra}`);
      } else {
        this.toast(String(err));
      }
    }
  }

  private build(): void {
    const model = this.section("model");
    const file = document.createElement("input");
    file.type = "file";
    file.accept = ".h5,.hdf5";
    file.addEventListener("change", () => {
      const chosen = file.files?.[0];
      if (!chosen) return;
      if (this.state.sessionId !== null && !window.confirm("Replace the current session?")) {
        file.value = "";
        return;
      }
      void this.guard(async () => {
        const bytes = new Uint8Array(await chosen.arrayBuffer());
        await this.state.loadModel(bytes);
        this.toast(`loaded ${chosen.name}`);
      });
      file.value = "";
    });
    model.append(file);
    const info = document.createElement("div");
    info.id = "session-info";
    model.append(info);

    const shape = this.section("shape");
    this.button(shape, "generate random shape", () =>
      this.state.randomize(Math.floor(Math.random() * 2 ** 31)),
    );
    this.button(shape, "reset to mean shape", () => this.state.resetToMean());
    const sliderBox = document.createElement("div");
    sliderBox.id = "sliders";
    shape.append(sliderBox);

    const obs = this.section("observations");
    const hint = document.createElement("p");
    hint.className = "hint";
    hint.textContent =
      "click the mesh to select a vertex, drag a gizmo axis to stage a move";
    obs.append(hint);
    this.button(obs, "pin selected vertex", () => this.state.pinSelected()).id = "pin";
    this.button(obs, "confirm move", () => this.state.confirmDrag()).id = "confirm-move";
    this.button(obs, "cancel move", () => this.state.cancelDrag()).id = "cancel-move";
    this.button(obs, "clear all", () => this.state.clearObservations());
    const list = document.createElement("ul");
    list.id = "observation-list";
    obs.append(list);

    const compute = this.section("posterior");
    this.button(compute, "compute posterior", async () => {
      const changed = await this.state.computePosterior();
      if (changed) this.toast("posterior applied");
    }).id = "compute";
    this.button(compute, "undo", () => this.state.undo());
    this.button(compute, "export PLY (binary)", () => this.download("ply_binary"));
    this.button(compute, "export PLY (ascii)", () => this.download("ply_ascii"));
    const busy = document.createElement("div");
    busy.id = "busy";
    busy.textContent = "working…";
    busy.style.display = "none";
    compute.append(busy);

    const toasts = document.createElement("div");
    toasts.id = "toasts";
    this.root.append(toasts);

    this.syncStagedButtons();
    this.syncSelection();
  }

  private async download(format: "ply_ascii" | "ply_binary"): Promise<void> {
    const bytes = await this.state.exportPly(format);
    const blob = new Blob([bytes as BlobPart], { type: "application/octet-stream" });
    const url = URL.createObjectURL(blob);
    const link = document.createElement("a");
    link.href = url;
    link.download = "shape.ply";
    link.click();
    URL.revokeObjectURL(url);
  }

  private rebuildSliders(): void {
    const box = document.getElementById("sliders")!;
    box.textContent = "";
    this.sliders = [];
    this.sliderLabels = [];
    const descriptor = this.state.descriptor;
    if (!descriptor) return;
    document.getElementById("session-info")!.textContent =
      `${descriptor.n_vertices} vertices, ${descriptor.m_components} components ` +
      `(session ${descriptor.session_id.slice(0, 8)})`;
    for (let i = 0; i < descriptor.m_components; i++) {
      const row = document.createElement("label");
      row.className = "slider-row";
      const range = this.state.sliderRange(i);
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(-range);
      slider.max = String(range);
      slider.step = String(range / 100);
      slider.value = "0";
      slider.addEventListener("change", () =>
        void this.guard(() => this.state.setSlider(i, parseFloat(slider.value))),
      );
      const label = document.createElement("span");
      label.textContent = `pc ${i + 1}`;
      const value = document.createElement("span");
      value.className = "slider-value";
      value.textContent = "0.00";
      row.append(label, slider, value);
      box.append(row);
      this.sliders.push(slider);
      this.sliderLabels.push(value);
    }
    this.syncSliders();
  }

  /** Sliders mirror the current coefficients (display scale: model units). */
  private syncSliders(): void {
    for (let i = 0; i < this.sliders.length; i++) {
      const display = this.state.alphaToDisplay(i, this.state.alpha[i] ?? 0);
      this.sliders[i].value = String(display);
      this.sliderLabels[i].textContent =
        `${display.toFixed(2)} (α=${(this.state.alpha[i] ?? 0).toFixed(2)})`;
    }
  }

  private renderObservations(): void {
    const list = document.getElementById("observation-list")!;
    list.textContent = "";
    for (const obs of this.state.observations) {
      const item = document.createElement("li");
      const target = obs.target.map((v) => v.toFixed(3)).join(", ");
      item.textContent = `v${obs.vertex_id} ${obs.kind} → [${target}] `;
      const remove = document.createElement("button");
      remove.textContent = "×";
      remove.addEventListener("click", () =>
        void this.guard(() => this.state.removeObservation(obs.vertex_id)),
      );
      item.append(remove);
      list.append(item);
    }
  }

  private syncStagedButtons(): void {
    const staged = this.state.staged !== null;
    (document.getElementById("confirm-move") as HTMLButtonElement).disabled = !staged;
    (document.getElementById("cancel-move") as HTMLButtonElement).disabled = !staged;
  }

  private syncSelection(): void {
    (document.getElementById("pin") as HTMLButtonElement).disabled =
      this.state.selectedVertex === null;
  }

  private syncBusy(): void {
    document.getElementById("busy")!.style.display = this.state.busy ? "block" : "none";
    (document.getElementById("compute") as HTMLButtonElement).disabled = this.state.busy;
  }

  toast(message: string, ms = 3500): void {
    const box = document.getElementById("toasts")!;
    const item = document.createElement("div");
    item.className = "toast";
    item.textContent = message;
    box.append(item);
    setTimeout(() => item.remove(), ms);
  }
}
