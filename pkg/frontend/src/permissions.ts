// Bundled descriptions for common extension permissions shown on the
// Permissions tab.

const DESCRIPTIONS: Record<string, string> = {
  cookies: 'Read and modify browser cookies, including session tokens, for permitted hosts.',
  storage: 'Persist extension data in browser-managed storage.',
  tabs: 'Observe and manipulate open tabs, including their URLs and titles.',
  activeTab: 'Temporary access to the tab the user is currently viewing.',
  scripting: 'Inject and execute scripts in web pages.',
  declarativeNetRequest: 'Rewrite or block network requests, including removing response headers.',
  webRequest: 'Observe network traffic made by the browser.',
  webRequestBlocking: 'Intercept and block network traffic synchronously.',
  clipboardRead: 'Read the contents of the system clipboard.',
  clipboardWrite: 'Write to the system clipboard.',
  nativeMessaging: 'Exchange messages with native applications installed on the machine.',
  downloads: 'Start, monitor, and manipulate file downloads.',
  history: 'Read and modify browsing history.',
  bookmarks: 'Read and modify bookmarks.',
  management: 'Inspect and manage other installed extensions.',
  notifications: 'Display system notifications.',
  alarms: 'Schedule code to run periodically or at a future time.',
  identity: 'Access OAuth2 identity tokens for the signed-in user.',
  geolocation: 'Access the device location without prompting.',
  proxy: 'Control the browser proxy configuration.',
  '<all_urls>': 'Operate on every website the browser can reach.',
};

export function describePermission(permission: string): string {
  if (permission in DESCRIPTIONS) return DESCRIPTIONS[permission];
  if (permission.includes('://')) {
    return `Operate on pages matching ${permission}.`;
  }
  return 'No bundled description for this permission.';
}

export function describeHostPattern(pattern: string): string {
  if (pattern === '<all_urls>') return DESCRIPTIONS['<all_urls>'];
  return `Access pages matching ${pattern}.`;
}
