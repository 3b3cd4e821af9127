/** App shell: two tabs over one API, dark theme by default with a toggle. */

import { ApiClient } from "./api.js";
import { ClusterView } from "./clustervis.js";
import { WhiteboardView } from "./whiteboard.js";

function activate(tab: string): void {
  document.querySelectorAll<HTMLElement>(".view").forEach((view) => {
    view.classList.toggle("hidden", view.id !== `view-${tab}`);
  });
  document.querySelectorAll<HTMLButtonElement>(".tab").forEach((button) => {
    button.classList.toggle("active", button.dataset.tab === tab);
  });
}

async function start(): Promise<void> {
  document.documentElement.dataset.theme = "dark";
  const client = new ApiClient("");

  const whiteboardRoot = document.getElementById("view-whiteboard")!;
  const clusterRoot = document.getElementById("view-clusters")!;
  const whiteboard = new WhiteboardView(client, whiteboardRoot);
  const clusters = new ClusterView(client, clusterRoot);

  document.querySelectorAll<HTMLButtonElement>(".tab").forEach((button) => {
    button.addEventListener("click", () => activate(button.dataset.tab!));
  });
  document.getElementById("theme-toggle")!.addEventListener("click", () => {
    const html = document.documentElement;
    html.dataset.theme = html.dataset.theme === "dark" ? "light" : "dark";
  });

  activate("clusters");
  await clusters.init();
  try {
    await whiteboard.init();
  } catch (err) {
    whiteboardRoot.textContent = `cannot reach the API: ${err}`;
  }
}

void start();
