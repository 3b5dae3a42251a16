import { HttpApi } from './api';
import { Dashboard } from './app';

const root = document.getElementById('app');
if (root) {
  const base = (window as { GOVDEPLOY_API?: string }).GOVDEPLOY_API ?? 'http://127.0.0.1:8000';
  const dashboard = new Dashboard(root, new HttpApi(base));
  void dashboard.start();
}
