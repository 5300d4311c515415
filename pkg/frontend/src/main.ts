// Entry point: hash-routes between the new-session wizard and a session
// dashboard (#/session/<id>).

import { Client } from "./api.js";
import { Dashboard, POLL_INTERVAL_MS } from "./dashboard.js";
import { Wizard } from "./wizard.js";

let active: Dashboard | null = null;

function route(): void {
  const root = document.getElementById("app");
  if (!root) return;
  if (active) {
    active.stopPolling();
    active = null;
  }
  const client = new Client("");
  const match = window.location.hash.match(/^#\/session\/([0-9a-f]+)(?:\?names=([^&]+))?$/);
  if (match) {
    const names = match[2] ? decodeURIComponent(match[2]).split(",") : undefined;
    const dash = new Dashboard(root, client, match[1], names);
    active = dash;
    void dash.load().then(() => dash.startPolling(POLL_INTERVAL_MS));
  } else {
    new Wizard(root, client, (state, names) => {
      window.location.hash = `#/session/${state.session_id}?names=${encodeURIComponent(names.join(","))}`;
    });
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
