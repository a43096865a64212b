import { DocumentDrawer } from "./drawer.js";
import {
  renderBanner,
  renderCollaborators,
  renderDocumentsTable,
  renderGeneration,
  renderSimilarityChart,
} from "./render.js";
import { QueryStore, type UiQueryState } from "./state.js";

function section(title: string, child: HTMLElement): HTMLElement {
  const wrap = document.createElement("section");
  const heading = document.createElement("h2");
  heading.textContent = title;
  wrap.appendChild(heading);
  wrap.appendChild(child);
  return wrap;
}

export function mount(app: HTMLElement): void {
  const store = new QueryStore();

  const form = document.createElement("form");
  form.className = "query-form";
  const input = document.createElement("input");
  input.type = "text";
  input.name = "query";
  input.placeholder = "Describe the expertise you are looking for";
  const kInput = document.createElement("input");
  kInput.type = "number";
  kInput.name = "k";
  kInput.min = "1";
  kInput.value = String(store.getState().k);
  const genLabel = document.createElement("label");
  const genToggle = document.createElement("input");
  genToggle.type = "checkbox";
  genToggle.name = "include_generation";
  genLabel.appendChild(genToggle);
  genLabel.appendChild(document.createTextNode(" include generated summary"));
  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Search";
  form.append(input, kInput, genLabel, submit);

  const bannerSlot = document.createElement("div");
  const status = document.createElement("p");
  status.className = "status-line";
  const results = document.createElement("div");
  results.className = "results";
  const drawerRoot = document.createElement("aside");
  drawerRoot.className = "drawer";
  drawerRoot.hidden = true;
  app.replaceChildren(form, bannerSlot, status, results, drawerRoot);

  const drawer = new DocumentDrawer(drawerRoot);
  const openDoc = (pmid: string) => {
    void drawer.open(pmid);
  };

  input.addEventListener("input", () => store.setQueryText(input.value));
  kInput.addEventListener("input", () => {
    const parsed = Number.parseInt(kInput.value, 10);
    if (Number.isFinite(parsed) && parsed >= 1) {
      store.setK(parsed);
    }
  });
  genToggle.addEventListener("change", () => store.setIncludeGeneration(genToggle.checked));
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void store.submit();
  });

  const paint = (state: UiQueryState) => {
    status.textContent = state.status === "loading" ? "querying..." : "";
    bannerSlot.replaceChildren();
    if (state.status === "error" && state.error) {
      bannerSlot.appendChild(renderBanner(state.error, () => store.dismissError()));
    }
    results.replaceChildren();
    const response = state.lastResponse;
    if (!response) {
      return;
    }
    results.appendChild(section("Retrieved documents", renderDocumentsTable(response.documents, openDoc)));
    if (response.documents.length) {
      results.appendChild(section("Similarity", renderSimilarityChart(response.documents)));
    }
    results.appendChild(section("Suggested collaborators", renderCollaborators(response.collaborators, openDoc)));
    if (response.generation) {
      results.appendChild(renderGeneration(response.generation));
    }
  };

  store.subscribe(paint);
  paint(store.getState());
}

const app = document.getElementById("app");
if (app) {
  mount(app);
}
