// Browser entry point: configuration comes from query parameters.
//   index.html?server=http://127.0.0.1:7461&room=default&token=p-tok

import { DashboardClient } from "./client.js";
import { render } from "./view.js";

function config() {
  const params = new URLSearchParams(window.location.search);
  return {
    httpBase: params.get("server") ?? "http://127.0.0.1:7461",
    roomId: params.get("room") ?? "default",
    token: params.get("token") ?? "",
  };
}

function start(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app container");
  }
  const client = new DashboardClient(config());

  const handlers = {
    onAction: (studentId: string, action: "unlock" | "end") => client.sendAction(studentId, action),
    onAcknowledge: (alertId: string) => client.acknowledge(alertId),
    onExpandImage: (imageRef: string, img: HTMLImageElement) => {
      client.fetchAlertImage(imageRef).then((buf) => {
        img.src = URL.createObjectURL(new Blob([buf]));
      }).catch(() => {
        img.alt = "capture unavailable";
      });
    },
  };

  client.onChange((state) => render(state, root, handlers));
  client.hydrate().catch((err) => {
    root.textContent = `cannot reach server: ${err.message ?? err}`;
  });
  client.connect();
}

start();
